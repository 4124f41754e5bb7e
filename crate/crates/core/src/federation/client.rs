use super::protocol::{error_code, Message};
use super::{Channel, ChunkSource, CostLedger, Direction, FederationError};
use crate::ingestion::ChunkDescriptor;
use crate::model::{M3Model, ModelConfig};
use crate::training::training_sequence;

#[derive(Debug, Clone)]
pub struct ClientOutcome {
    pub client_id: u32,
    /// Frames this client sent and received.
    pub ledger: CostLedger,
    /// Last global model received, if any.
    pub global: Option<M3Model>,
    pub rounds_trained: u32,
}

struct Client<'a, C> {
    channel: &'a mut C,
    client_id: u32,
    ledger: CostLedger,
}

impl<C: Channel> Client<'_, C> {
    fn send(&mut self, round: u32, msg: &Message) -> Result<(), FederationError> {
        let n = self.channel.send(msg)?;
        self.ledger
            .record_message(round, Direction::ClientToServer, self.client_id, msg, n);
        Ok(())
    }

    /// Reports a local failure to the server, then returns it.
    fn fail(&mut self, round: u32, code: u16, err: FederationError) -> FederationError {
        let _ = self.send(
            round,
            &Message::Error {
                code,
                text: err.to_string(),
            },
        );
        err
    }
}

/// Runs one client session until FINISH.
///
/// Each TRAIN builds a fresh model from the empty model (or from the last
/// received global model when `seed_from_global`) on the chunk's records in
/// timestamp order, and uploads it.
pub fn run_client<C: Channel>(
    channel: &mut C,
    client_id: u32,
    config: ModelConfig,
    source: &dyn ChunkSource,
    seed_from_global: bool,
) -> Result<ClientOutcome, FederationError> {
    let mut c = Client {
        channel,
        client_id,
        ledger: CostLedger::new(),
    };
    c.send(
        0,
        &Message::Hello {
            client_id,
            ship_type: config.ship_type.code(),
        },
    )?;

    let mut global: Option<M3Model> = None;
    let mut rounds_trained = 0;
    let mut current = 0;
    loop {
        let (msg, n) = c.channel.recv()?;
        let round = match &msg {
            Message::Train { round, .. }
            | Message::ClientModel { round, .. }
            | Message::GlobalModel { round, .. }
            | Message::RoundDone { round } => *round,
            _ => current,
        };
        current = round;
        c.ledger
            .record_message(round, Direction::ServerToClient, client_id, &msg, n);
        match msg {
            Message::GlobalModel { model, .. } => {
                let m = match M3Model::from_bytes(&model) {
                    Ok(m) => m,
                    Err(e) => return Err(c.fail(round, error_code::PROTOCOL, e.into())),
                };
                if *m.config() != config {
                    let e = FederationError::ConfigMismatch("global model config differs from local config".into());
                    return Err(c.fail(round, error_code::CONFIG_MISMATCH, e));
                }
                global = Some(m);
            }
            Message::Train { chunk, .. } => {
                let descriptor: ChunkDescriptor = match chunk.parse() {
                    Ok(d) => d,
                    Err(_) => return Err(c.fail(round, error_code::UNKNOWN_CHUNK, FederationError::UnknownChunk(chunk))),
                };
                let records = match source.load(&descriptor) {
                    Ok(r) => r,
                    Err(e) => {
                        return Err(c.fail(
                            round,
                            error_code::UNKNOWN_CHUNK,
                            FederationError::UnknownChunk(format!("{chunk}: {e}")),
                        ))
                    }
                };
                let mut model = match (&global, seed_from_global) {
                    (Some(g), true) => g.clone(),
                    _ => M3Model::empty(config),
                };
                model.train(&training_sequence(&config, &records));
                c.send(
                    round,
                    &Message::ClientModel {
                        round,
                        model: model.to_bytes(),
                    },
                )?;
                rounds_trained += 1;
            }
            Message::RoundDone { .. } => {}
            Message::Finish => {
                return Ok(ClientOutcome {
                    client_id,
                    ledger: c.ledger,
                    global,
                    rounds_trained,
                })
            }
            Message::Error { code, text } => return Err(FederationError::Remote { code, text }),
            other @ (Message::Hello { .. } | Message::ClientModel { .. }) => {
                let e = FederationError::Protocol(format!("server sent {}", other.name()));
                return Err(c.fail(round, error_code::PROTOCOL, e));
            }
        }
    }
}
