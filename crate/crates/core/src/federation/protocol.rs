//! Length-prefixed message framing.
//!
//! ```text
//! length u32 LE (payload bytes only) | type u8 | payload
//! 0 HELLO        client_id u32 | ship_type u8
//! 1 TRAIN        round u32 | chunk descriptor, utf-8 to end of payload
//! 2 CLIENT_MODEL round u32 | model bytes
//! 3 GLOBAL_MODEL round u32 | model bytes
//! 4 ROUND_DONE   round u32
//! 5 FINISH       (empty)
//! 6 ERROR        code u16 | utf-8 text
//! ```
//! All integers are little-endian.

use std::io::{self, Read, Write};

use super::FederationError;

pub const FRAME_HEADER_LEN: usize = 5;
/// Frame header plus the round field that precedes model bytes.
pub const MODEL_FRAME_OVERHEAD: usize = FRAME_HEADER_LEN + 4;
/// Upper bound on accepted payloads; larger length fields are rejected
/// before any allocation.
pub const MAX_PAYLOAD_LEN: u32 = 1 << 30;

pub mod error_code {
    pub const PROTOCOL: u16 = 1;
    pub const CONFIG_MISMATCH: u16 = 2;
    pub const ABORTED: u16 = 3;
    pub const UNKNOWN_CHUNK: u16 = 4;
    pub const TRAINING: u16 = 5;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Hello { client_id: u32, ship_type: u8 },
    Train { round: u32, chunk: String },
    ClientModel { round: u32, model: Vec<u8> },
    GlobalModel { round: u32, model: Vec<u8> },
    RoundDone { round: u32 },
    Finish,
    Error { code: u16, text: String },
}

impl Message {
    pub fn type_byte(&self) -> u8 {
        match self {
            Message::Hello { .. } => 0,
            Message::Train { .. } => 1,
            Message::ClientModel { .. } => 2,
            Message::GlobalModel { .. } => 3,
            Message::RoundDone { .. } => 4,
            Message::Finish => 5,
            Message::Error { .. } => 6,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "HELLO",
            Message::Train { .. } => "TRAIN",
            Message::ClientModel { .. } => "CLIENT_MODEL",
            Message::GlobalModel { .. } => "GLOBAL_MODEL",
            Message::RoundDone { .. } => "ROUND_DONE",
            Message::Finish => "FINISH",
            Message::Error { .. } => "ERROR",
        }
    }

    pub fn is_model(&self) -> bool {
        matches!(self, Message::ClientModel { .. } | Message::GlobalModel { .. })
    }

    fn payload(&self) -> Vec<u8> {
        let mut p = Vec::new();
        match self {
            Message::Hello { client_id, ship_type } => {
                p.extend_from_slice(&client_id.to_le_bytes());
                p.push(*ship_type);
            }
            Message::Train { round, chunk } => {
                p.extend_from_slice(&round.to_le_bytes());
                p.extend_from_slice(chunk.as_bytes());
            }
            Message::ClientModel { round, model } | Message::GlobalModel { round, model } => {
                p.reserve(4 + model.len());
                p.extend_from_slice(&round.to_le_bytes());
                p.extend_from_slice(model);
            }
            Message::RoundDone { round } => p.extend_from_slice(&round.to_le_bytes()),
            Message::Finish => {}
            Message::Error { code, text } => {
                p.extend_from_slice(&code.to_le_bytes());
                p.extend_from_slice(text.as_bytes());
            }
        }
        p
    }

    /// The complete frame: header and payload.
    pub fn encode(&self) -> Vec<u8> {
        let payload = self.payload();
        let mut frame = Vec::with_capacity(FRAME_HEADER_LEN + payload.len());
        frame.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        frame.push(self.type_byte());
        frame.extend_from_slice(&payload);
        frame
    }

    pub fn decode_payload(type_byte: u8, payload: &[u8]) -> Result<Message, FederationError> {
        let bad = |what: &str| FederationError::Protocol(format!("malformed {what} payload ({} bytes)", payload.len()));
        let u32_at = |what: &str| -> Result<u32, FederationError> {
            payload
                .get(..4)
                .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
                .ok_or_else(|| bad(what))
        };
        let text = |bytes: &[u8], what: &str| -> Result<String, FederationError> {
            String::from_utf8(bytes.to_vec()).map_err(|_| bad(what))
        };
        Ok(match type_byte {
            0 => {
                if payload.len() != 5 {
                    return Err(bad("HELLO"));
                }
                Message::Hello {
                    client_id: u32_at("HELLO")?,
                    ship_type: payload[4],
                }
            }
            1 => Message::Train {
                round: u32_at("TRAIN")?,
                chunk: text(&payload[4..], "TRAIN")?,
            },
            2 => Message::ClientModel {
                round: u32_at("CLIENT_MODEL")?,
                model: payload[4..].to_vec(),
            },
            3 => Message::GlobalModel {
                round: u32_at("GLOBAL_MODEL")?,
                model: payload[4..].to_vec(),
            },
            4 => {
                if payload.len() != 4 {
                    return Err(bad("ROUND_DONE"));
                }
                Message::RoundDone {
                    round: u32_at("ROUND_DONE")?,
                }
            }
            5 => {
                if !payload.is_empty() {
                    return Err(bad("FINISH"));
                }
                Message::Finish
            }
            6 => {
                if payload.len() < 2 {
                    return Err(bad("ERROR"));
                }
                Message::Error {
                    code: u16::from_le_bytes([payload[0], payload[1]]),
                    text: text(&payload[2..], "ERROR")?,
                }
            }
            t => return Err(FederationError::Protocol(format!("unknown message type {t}"))),
        })
    }

    /// Decodes exactly one complete frame.
    pub fn decode(frame: &[u8]) -> Result<Message, FederationError> {
        if frame.len() < FRAME_HEADER_LEN {
            return Err(FederationError::Protocol("frame shorter than its header".into()));
        }
        let len = u32::from_le_bytes(frame[..4].try_into().expect("4 bytes")) as usize;
        if frame.len() - FRAME_HEADER_LEN != len {
            return Err(FederationError::Protocol(format!(
                "length field {len} does not match {} payload bytes",
                frame.len() - FRAME_HEADER_LEN
            )));
        }
        Message::decode_payload(frame[4], &frame[FRAME_HEADER_LEN..])
    }
}

/// Writes one frame and flushes; returns the bytes written.
pub fn write_frame<W: Write>(w: &mut W, msg: &Message) -> io::Result<u64> {
    let frame = msg.encode();
    w.write_all(&frame)?;
    w.flush()?;
    Ok(frame.len() as u64)
}

/// Reads one frame; returns the message and the bytes consumed.
pub fn read_frame<R: Read>(r: &mut R) -> Result<(Message, u64), FederationError> {
    let mut header = [0u8; FRAME_HEADER_LEN];
    r.read_exact(&mut header)?;
    let len = u32::from_le_bytes(header[..4].try_into().expect("4 bytes"));
    if len > MAX_PAYLOAD_LEN {
        return Err(FederationError::Protocol(format!("payload length {len} exceeds limit")));
    }
    let mut payload = vec![0u8; len as usize];
    r.read_exact(&mut payload)?;
    let msg = Message::decode_payload(header[4], &payload)?;
    Ok((msg, (FRAME_HEADER_LEN + payload.len()) as u64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all() -> Vec<Message> {
        vec![
            Message::Hello {
                client_id: 7,
                ship_type: 2,
            },
            Message::Train {
                round: 3,
                chunk: "2018-07-01/2018-07-02".into(),
            },
            Message::ClientModel {
                round: 1,
                model: vec![1, 2, 3],
            },
            Message::GlobalModel {
                round: 9,
                model: Vec::new(),
            },
            Message::RoundDone { round: 365 },
            Message::Finish,
            Message::Error {
                code: error_code::CONFIG_MISMATCH,
                text: "grid differs".into(),
            },
        ]
    }

    #[test]
    fn round_trip_every_type() {
        for m in all() {
            let f = m.encode();
            assert_eq!(f[4], m.type_byte());
            assert_eq!(Message::decode(&f).unwrap(), m);
            let (back, n) = read_frame(&mut f.as_slice()).unwrap();
            assert_eq!((back, n as usize), (m, f.len()));
        }
    }

    #[test]
    fn exact_layouts() {
        let hello = Message::Hello {
            client_id: 0x01020304,
            ship_type: 1,
        };
        assert_eq!(hello.encode(), vec![5, 0, 0, 0, 0, 4, 3, 2, 1, 1]);
        assert_eq!(Message::Finish.encode(), vec![0, 0, 0, 0, 5]);
        let m = Message::ClientModel {
            round: 2,
            model: vec![0xAA; 222],
        };
        let f = m.encode();
        assert_eq!(f.len(), 222 + MODEL_FRAME_OVERHEAD);
        assert_eq!(&f[..9], &[226, 0, 0, 0, 2, 2, 0, 0, 0]);
    }

    #[test]
    fn rejects_bad_frames() {
        let mut f = Message::RoundDone { round: 1 }.encode();
        f[4] = 7;
        assert!(matches!(Message::decode(&f), Err(FederationError::Protocol(_))));
        let mut f = Message::RoundDone { round: 1 }.encode();
        f[0] = 5;
        assert!(Message::decode(&f).is_err());
        assert!(Message::decode(&[0, 0, 0]).is_err());
        assert!(Message::decode_payload(0, &[1, 2, 3]).is_err());
        assert!(Message::decode_payload(1, &[0, 0, 0, 0, 0xFF]).is_err());
        let huge = [0xFF, 0xFF, 0xFF, 0xFF, 2];
        assert!(matches!(read_frame(&mut huge.as_slice()), Err(FederationError::Protocol(_))));
    }

    #[test]
    fn truncated_stream_is_transport_error() {
        let f = Message::RoundDone { round: 1 }.encode();
        assert!(matches!(read_frame(&mut &f[..6]), Err(FederationError::Transport(_))));
    }
}
