use serde::{Deserialize, Serialize};

use super::ProtocolError;
use crate::emg::{EmgFrame, CHANNELS};

pub const EMG_PACKET_LEN: usize = 16;
pub const IMU_PACKET_LEN: usize = 20;

pub const ORIENTATION_SCALE: f64 = 16384.0;
pub const ACCEL_SCALE: f64 = 2048.0;
pub const GYRO_SCALE: f64 = 16.0;

/// Two consecutive 8-channel EMG samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmgDataPacket {
    pub samples: [[i8; CHANNELS]; 2],
}

impl EmgDataPacket {
    pub fn encode(&self) -> [u8; EMG_PACKET_LEN] {
        let mut out = [0u8; EMG_PACKET_LEN];
        for (dst, src) in out.iter_mut().zip(self.samples.iter().flatten()) {
            *dst = *src as u8;
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ProtocolError> {
        if bytes.len() != EMG_PACKET_LEN {
            return Err(ProtocolError::MalformedPacket(format!(
                "EMG packet is {} bytes, expected {EMG_PACKET_LEN}",
                bytes.len()
            )));
        }
        let mut samples = [[0i8; CHANNELS]; 2];
        for (i, b) in bytes.iter().enumerate() {
            samples[i / CHANNELS][i % CHANNELS] = *b as i8;
        }
        Ok(Self { samples })
    }

    /// Stamps the two samples at `first_us` and `first_us + period_us`.
    pub fn to_frames(&self, first_us: u64, period_us: u64) -> (EmgFrame, EmgFrame) {
        (EmgFrame::new(first_us, self.samples[0]), EmgFrame::new(first_us + period_us, self.samples[1]))
    }
}

/// Raw fixed-point IMU words as sent on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImuDataPacket {
    /// w, x, y, z
    pub orientation: [i16; 4],
    pub accelerometer: [i16; 3],
    pub gyroscope: [i16; 3],
}

/// IMU sample in physical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuReading {
    pub orientation: [f64; 4],
    /// Acceleration in g.
    pub accel_g: [f64; 3],
    /// Angular rate in degrees per second.
    pub gyro_dps: [f64; 3],
}

impl ImuDataPacket {
    /// Identity orientation, 1 g on +z, no rotation.
    pub const RESTING: ImuDataPacket =
        ImuDataPacket { orientation: [16384, 0, 0, 0], accelerometer: [0, 0, 2048], gyroscope: [0, 0, 0] };

    pub fn encode(&self) -> [u8; IMU_PACKET_LEN] {
        let mut out = [0u8; IMU_PACKET_LEN];
        let words = self.orientation.iter().chain(&self.accelerometer).chain(&self.gyroscope);
        for (chunk, w) in out.chunks_exact_mut(2).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ProtocolError> {
        if bytes.len() != IMU_PACKET_LEN {
            return Err(ProtocolError::MalformedPacket(format!(
                "IMU packet is {} bytes, expected {IMU_PACKET_LEN}",
                bytes.len()
            )));
        }
        let mut words = bytes.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]]));
        let mut next = || words.next().expect("20 bytes hold 10 words");
        Ok(Self {
            orientation: [next(), next(), next(), next()],
            accelerometer: [next(), next(), next()],
            gyroscope: [next(), next(), next()],
        })
    }

    pub fn scaled(&self) -> ImuReading {
        let scale = |ws: &[i16], s: f64| ws.iter().map(|w| f64::from(*w) / s).collect::<Vec<_>>();
        let o = scale(&self.orientation, ORIENTATION_SCALE);
        let a = scale(&self.accelerometer, ACCEL_SCALE);
        let g = scale(&self.gyroscope, GYRO_SCALE);
        ImuReading { orientation: [o[0], o[1], o[2], o[3]], accel_g: [a[0], a[1], a[2]], gyro_dps: [g[0], g[1], g[2]] }
    }
}

/// On-device classifier notification. Decoded for compatibility only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierEventPacket {
    pub event_type: u8,
    pub payload: Vec<u8>,
}

impl ClassifierEventPacket {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 + self.payload.len());
        out.push(self.event_type);
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ProtocolError> {
        match bytes.split_first() {
            Some((t, rest)) => Ok(Self { event_type: *t, payload: rest.to_vec() }),
            None => Err(ProtocolError::MalformedPacket("empty classifier event".into())),
        }
    }
}
