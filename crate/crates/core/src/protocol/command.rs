use serde::{Deserialize, Serialize};

use super::ProtocolError;

const OP_SET_MODE: u8 = 0x01;
const OP_VIBRATE: u8 = 0x03;
const OP_DEEP_SLEEP: u8 = 0x04;

pub const EMG_MODES: [u8; 3] = [0, 2, 3];
pub const IMU_MODES: [u8; 5] = [0, 1, 3, 4, 5];
pub const CLASSIFIER_MODES: [u8; 2] = [0, 1];
pub const VIBRATION_KINDS: [u8; 3] = [1, 2, 3];

/// Control messages written to the armband.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    SetMode {
        emg_mode: u8,
        imu_mode: u8,
        classifier_mode: u8,
    },
    /// 1 short, 2 medium, 3 long.
    Vibrate {
        kind: u8,
    },
    DeepSleep,
}

impl Command {
    /// Mode used by the host: EMG and IMU streaming on, device classifier off.
    pub const STREAM_ALL: Command = Command::SetMode { emg_mode: 2, imu_mode: 1, classifier_mode: 0 };

    pub fn validate(&self) -> Result<(), ProtocolError> {
        let check = |name: &str, v: u8, allowed: &[u8]| {
            if allowed.contains(&v) {
                Ok(())
            } else {
                Err(ProtocolError::InvalidCommand(format!("{name} {v} not in {allowed:?}")))
            }
        };
        match *self {
            Command::SetMode { emg_mode, imu_mode, classifier_mode } => {
                check("emg_mode", emg_mode, &EMG_MODES)?;
                check("imu_mode", imu_mode, &IMU_MODES)?;
                check("classifier_mode", classifier_mode, &CLASSIFIER_MODES)
            }
            Command::Vibrate { kind } => check("vibration kind", kind, &VIBRATION_KINDS),
            Command::DeepSleep => Ok(()),
        }
    }
}

/// `[opcode, payload_len, payload...]`
pub fn encode_command(cmd: &Command) -> Result<Vec<u8>, ProtocolError> {
    cmd.validate()?;
    Ok(match *cmd {
        Command::SetMode { emg_mode, imu_mode, classifier_mode } => {
            vec![OP_SET_MODE, 3, emg_mode, imu_mode, classifier_mode]
        }
        Command::Vibrate { kind } => vec![OP_VIBRATE, 1, kind],
        Command::DeepSleep => vec![OP_DEEP_SLEEP, 0],
    })
}

pub fn decode_command(bytes: &[u8]) -> Result<Command, ProtocolError> {
    let Some(&opcode) = bytes.first() else {
        return Err(ProtocolError::MalformedPacket("empty command".into()));
    };
    let expected_len = match opcode {
        OP_SET_MODE => 3,
        OP_VIBRATE => 1,
        OP_DEEP_SLEEP => 0,
        other => return Err(ProtocolError::UnknownCommand(other)),
    };
    let Some(&declared) = bytes.get(1) else {
        return Err(ProtocolError::MalformedPacket("missing payload length".into()));
    };
    if usize::from(declared) != bytes.len() - 2 || declared != expected_len {
        return Err(ProtocolError::MalformedPacket(format!(
            "opcode {opcode:#04x}: declared {declared} payload bytes, got {}, expected {expected_len}",
            bytes.len() - 2
        )));
    }
    let p = &bytes[2..];
    let cmd = match opcode {
        OP_SET_MODE => Command::SetMode { emg_mode: p[0], imu_mode: p[1], classifier_mode: p[2] },
        OP_VIBRATE => Command::Vibrate { kind: p[0] },
        _ => Command::DeepSleep,
    };
    cmd.validate()?;
    Ok(cmd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn encodings() {
        let set = Command::SetMode { emg_mode: 2, imu_mode: 1, classifier_mode: 0 };
        assert_eq!(encode_command(&set).unwrap(), [0x01, 0x03, 0x02, 0x01, 0x00]);
        assert_eq!(encode_command(&Command::Vibrate { kind: 1 }).unwrap(), [0x03, 0x01, 0x01]);
        assert_eq!(encode_command(&Command::DeepSleep).unwrap(), [0x04, 0x00]);
        assert!(matches!(encode_command(&Command::Vibrate { kind: 7 }), Err(ProtocolError::InvalidCommand(_))));
        assert!(encode_command(&Command::SetMode { emg_mode: 1, imu_mode: 0, classifier_mode: 0 }).is_err());
    }

    #[test]
    fn decodings() {
        assert_eq!(
            decode_command(&[0x01, 0x03, 0x02, 0x01, 0x00]).unwrap(),
            Command::SetMode { emg_mode: 2, imu_mode: 1, classifier_mode: 0 }
        );
        assert!(matches!(decode_command(&[]), Err(ProtocolError::MalformedPacket(_))));
        assert!(matches!(decode_command(&[0x03]), Err(ProtocolError::MalformedPacket(_))));
        assert!(matches!(decode_command(&[0x03, 0x02, 0x01]), Err(ProtocolError::MalformedPacket(_))));
        assert!(matches!(decode_command(&[0x03, 0x02, 0x01, 0x01]), Err(ProtocolError::MalformedPacket(_))));
        assert_eq!(decode_command(&[0x7f, 0x00]), Err(ProtocolError::UnknownCommand(0x7f)));
        assert!(matches!(decode_command(&[0x03, 0x01, 0x09]), Err(ProtocolError::InvalidCommand(_))));
    }

    fn arb_command() -> impl Strategy<Value = Command> {
        prop_oneof![
            (
                prop::sample::select(EMG_MODES.to_vec()),
                prop::sample::select(IMU_MODES.to_vec()),
                prop::sample::select(CLASSIFIER_MODES.to_vec())
            )
                .prop_map(|(emg_mode, imu_mode, classifier_mode)| Command::SetMode {
                    emg_mode,
                    imu_mode,
                    classifier_mode
                }),
            prop::sample::select(VIBRATION_KINDS.to_vec()).prop_map(|kind| Command::Vibrate { kind }),
            Just(Command::DeepSleep),
        ]
    }

    proptest! {
        #[test]
        fn round_trip(cmd in arb_command()) {
            prop_assert_eq!(decode_command(&encode_command(&cmd).unwrap()).unwrap(), cmd);
        }

        #[test]
        fn decoder_is_total(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
            if let Ok(cmd) = decode_command(&bytes) {
                prop_assert_eq!(encode_command(&cmd).unwrap(), bytes);
            }
        }
    }
}
