use super::ProtocolError;

/// Largest payload a frame can carry: the u16 length also covers the
/// two-byte attribute id.
pub const MAX_PAYLOAD: usize = u16::MAX as usize - 2;

/// One notification or write on a stream transport:
/// `[len: u16 LE][attribute_id: u16 LE][payload]`, `len = 2 + payload.len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramedMessage {
    pub attribute_id: u16,
    pub payload: Vec<u8>,
}

pub fn frame_write(attribute_id: u16, payload: &[u8]) -> Result<Vec<u8>, ProtocolError> {
    if payload.len() > MAX_PAYLOAD {
        return Err(ProtocolError::PayloadTooLarge(payload.len()));
    }
    let len = (payload.len() + 2) as u16;
    let mut out = Vec::with_capacity(4 + payload.len());
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&attribute_id.to_le_bytes());
    out.extend_from_slice(payload);
    Ok(out)
}

/// Reassembles frames from arbitrarily chunked input. Incomplete trailing
/// bytes stay buffered until more data arrives.
#[derive(Debug, Default, Clone)]
pub struct FrameReader {
    buf: Vec<u8>,
    start: usize,
}

impl FrameReader {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        if self.start > 0 && self.start >= self.buf.len() / 2 {
            self.buf.drain(..self.start);
            self.start = 0;
        }
        self.buf.extend_from_slice(bytes);
    }

    /// Bytes waiting for the rest of their frame.
    pub fn pending(&self) -> usize {
        self.buf.len() - self.start
    }

    /// Next complete message, or `None` when more data is needed. A frame
    /// declaring a length below 2 cannot be resynchronized and is an error.
    pub fn next_message(&mut self) -> Result<Option<FramedMessage>, ProtocolError> {
        let avail = &self.buf[self.start..];
        if avail.len() < 2 {
            return Ok(None);
        }
        let len = u16::from_le_bytes([avail[0], avail[1]]);
        if len < 2 {
            return Err(ProtocolError::MalformedFrame(len));
        }
        let total = 2 + usize::from(len);
        if avail.len() < total {
            return Ok(None);
        }
        let attribute_id = u16::from_le_bytes([avail[2], avail[3]]);
        let payload = avail[4..total].to_vec();
        self.start += total;
        Ok(Some(FramedMessage { attribute_id, payload }))
    }

    /// Pushes `bytes` and drains every complete message.
    pub fn read(&mut self, bytes: &[u8]) -> Result<Vec<FramedMessage>, ProtocolError> {
        self.push(bytes);
        let mut out = Vec::new();
        while let Some(m) = self.next_message()? {
            out.push(m);
        }
        Ok(out)
    }

    pub fn clear(&mut self) {
        self.buf.clear();
        self.start = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout() {
        assert_eq!(frame_write(0x0102, &[9, 8]).unwrap(), [4, 0, 0x02, 0x01, 9, 8]);
        assert_eq!(frame_write(7, &[]).unwrap(), [2, 0, 7, 0]);
        assert!(matches!(frame_write(1, &vec![0; MAX_PAYLOAD + 1]), Err(ProtocolError::PayloadTooLarge(_))));
        assert!(frame_write(1, &vec![0; MAX_PAYLOAD]).is_ok());
    }

    #[test]
    fn one_message_round_trip() {
        let mut r = FrameReader::new();
        let msgs = r.read(&frame_write(2, b"hello").unwrap()).unwrap();
        assert_eq!(msgs, vec![FramedMessage { attribute_id: 2, payload: b"hello".to_vec() }]);
        assert_eq!(r.pending(), 0);
    }

    #[test]
    fn two_frames_in_one_read() {
        let mut bytes = frame_write(1, &[1]).unwrap();
        bytes.extend(frame_write(3, &[2, 2]).unwrap());
        let msgs = FrameReader::new().read(&bytes).unwrap();
        assert_eq!(msgs.iter().map(|m| m.attribute_id).collect::<Vec<_>>(), vec![1, 3]);
    }

    #[test]
    fn cut_mid_frame_keeps_remainder() {
        let a = frame_write(1, &[1, 2, 3]).unwrap();
        let b = frame_write(2, &[4, 5, 6, 7]).unwrap();
        let all = [a.clone(), b.clone()].concat();
        for cut in a.len()..all.len() {
            let mut r = FrameReader::new();
            let first = r.read(&all[..cut]).unwrap();
            assert_eq!(first.len(), if cut == all.len() { 2 } else { 1 });
            assert_eq!(r.pending(), cut - a.len());
            let rest = r.read(&all[cut..]).unwrap();
            assert_eq!(first.len() + rest.len(), 2);
        }
    }

    #[test]
    fn short_length_is_malformed() {
        assert_eq!(FrameReader::new().read(&[1, 0, 5]), Err(ProtocolError::MalformedFrame(1)));
        assert_eq!(FrameReader::new().read(&[0, 0]), Err(ProtocolError::MalformedFrame(0)));
    }

    proptest! {
        #[test]
        fn split_invariant(
            msgs in prop::collection::vec((any::<u16>(), prop::collection::vec(any::<u8>(), 0..40)), 0..8),
            chunk in 1usize..17,
        ) {
            let expected: Vec<_> = msgs.iter()
                .map(|(a, p)| FramedMessage { attribute_id: *a, payload: p.clone() })
                .collect();
            let bytes: Vec<u8> = msgs.iter().flat_map(|(a, p)| frame_write(*a, p).unwrap()).collect();
            let mut r = FrameReader::new();
            let mut got = Vec::new();
            for c in bytes.chunks(chunk) {
                got.extend(r.read(c).unwrap());
            }
            prop_assert_eq!(got, expected);
            prop_assert_eq!(r.pending(), 0);
        }
    }
}
