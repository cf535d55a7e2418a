//! Armband wire protocol: control commands, EMG/IMU/classifier
//! notifications, and the length-prefixed framing used on stream
//! transports.

mod command;
mod framing;
mod packet;

use serde::{Deserialize, Serialize};

pub use command::{decode_command, encode_command, Command, CLASSIFIER_MODES, EMG_MODES, IMU_MODES, VIBRATION_KINDS};
pub use framing::{frame_write, FrameReader, FramedMessage, MAX_PAYLOAD};
pub use packet::{
    ClassifierEventPacket, EmgDataPacket, ImuDataPacket, ImuReading, ACCEL_SCALE, EMG_PACKET_LEN, GYRO_SCALE,
    IMU_PACKET_LEN, ORIENTATION_SCALE,
};

/// Logical attribute ids carried in each frame.
pub mod attribute {
    pub const COMMAND: u16 = 1;
    pub const EMG: u16 = 2;
    pub const IMU: u16 = 3;
    pub const CLASSIFIER_EVENT: u16 = 4;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("invalid command: {0}")]
    InvalidCommand(String),
    #[error("unknown command opcode {0:#04x}")]
    UnknownCommand(u8),
    #[error("malformed packet: {0}")]
    MalformedPacket(String),
    #[error("malformed frame: declared length {0} < 2")]
    MalformedFrame(u16),
    #[error("payload of {0} bytes does not fit in a frame")]
    PayloadTooLarge(usize),
    #[error("unknown attribute id {0}")]
    UnknownAttribute(u16),
}

/// Any message that travels over the framed link, in either direction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DeviceMessage {
    Command(Command),
    Emg(EmgDataPacket),
    Imu(ImuDataPacket),
    ClassifierEvent(ClassifierEventPacket),
}

impl DeviceMessage {
    pub fn attribute_id(&self) -> u16 {
        match self {
            DeviceMessage::Command(_) => attribute::COMMAND,
            DeviceMessage::Emg(_) => attribute::EMG,
            DeviceMessage::Imu(_) => attribute::IMU,
            DeviceMessage::ClassifierEvent(_) => attribute::CLASSIFIER_EVENT,
        }
    }

    pub fn payload(&self) -> Result<Vec<u8>, ProtocolError> {
        Ok(match self {
            DeviceMessage::Command(c) => encode_command(c)?,
            DeviceMessage::Emg(p) => p.encode().to_vec(),
            DeviceMessage::Imu(p) => p.encode().to_vec(),
            DeviceMessage::ClassifierEvent(p) => p.encode(),
        })
    }

    /// Encodes and frames the message.
    pub fn to_frame(&self) -> Result<Vec<u8>, ProtocolError> {
        frame_write(self.attribute_id(), &self.payload()?)
    }

    pub fn from_frame(msg: &FramedMessage) -> Result<Self, ProtocolError> {
        let p = &msg.payload;
        Ok(match msg.attribute_id {
            attribute::COMMAND => DeviceMessage::Command(decode_command(p)?),
            attribute::EMG => DeviceMessage::Emg(EmgDataPacket::decode(p)?),
            attribute::IMU => DeviceMessage::Imu(ImuDataPacket::decode(p)?),
            attribute::CLASSIFIER_EVENT => DeviceMessage::ClassifierEvent(ClassifierEventPacket::decode(p)?),
            other => return Err(ProtocolError::UnknownAttribute(other)),
        })
    }
}
