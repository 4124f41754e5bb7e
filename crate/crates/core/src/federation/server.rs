use super::protocol::{error_code, Message};
use super::{Abort, Channel, CostLedger, Direction, FederationConfig, FederationError};
use crate::ingestion::RoundPlan;
use crate::model::{aggregate, M3Model, ModelConfig};

#[derive(Debug, Clone)]
pub struct ServerOutcome {
    pub model: M3Model,
    pub ledger: CostLedger,
}

struct Session<C> {
    client_id: u32,
    channel: C,
}

struct Server<'a, C> {
    sessions: Vec<Session<C>>,
    ledger: CostLedger,
    global: M3Model,
    config: &'a ModelConfig,
}

impl<C: Channel> Server<'_, C> {
    fn send(&mut self, i: usize, round: u32, msg: &Message) -> Result<(), FederationError> {
        let s = &mut self.sessions[i];
        let n = s.channel.send(msg)?;
        self.ledger.record_message(round, Direction::ServerToClient, s.client_id, msg, n);
        Ok(())
    }

    fn broadcast(&mut self, round: u32, msg: &Message) -> Result<(), FederationError> {
        (0..self.sessions.len()).try_for_each(|i| self.send(i, round, msg))
    }

    /// Best-effort ERROR to every session (`culprit` gets `culprit_code`),
    /// then the abort carrying the last completed global model.
    fn abort(mut self, round: u32, reason: String, culprit: Option<(usize, u16)>) -> FederationError {
        for i in 0..self.sessions.len() {
            let code = match culprit {
                Some((c, code)) if c == i => code,
                _ => error_code::ABORTED,
            };
            let _ = self.send(
                i,
                round,
                &Message::Error {
                    code,
                    text: reason.clone(),
                },
            );
        }
        FederationError::Aborted(Box::new(Abort {
            round,
            reason,
            last_global: self.global,
            ledger: self.ledger,
        }))
    }

    /// Receives one message from every session concurrently; results come
    /// back in session order.
    fn collect(&mut self) -> Vec<Result<(Message, u64), FederationError>> {
        std::thread::scope(|scope| {
            let handles: Vec<_> = self
                .sessions
                .iter_mut()
                .map(|s| scope.spawn(move || s.channel.recv()))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("receiver thread panicked"))
                .collect()
        })
    }
}

/// Drives a whole federation over already-connected sessions.
///
/// Round `t` trains on `plan.rounds()[t-1]` and sets
/// `global = aggregate([global] ++ uploads)`; with `seed_from_global` the
/// uploads already contain the previous global model and are aggregated alone.
pub fn run_server<C: Channel>(
    cfg: &FederationConfig,
    model_config: ModelConfig,
    plan: &RoundPlan,
    channels: Vec<C>,
) -> Result<ServerOutcome, FederationError> {
    cfg.validate()?;
    model_config.validate()?;
    if channels.len() != cfg.n_clients as usize {
        return Err(FederationError::InvalidConfig(format!(
            "{} sessions for {} clients",
            channels.len(),
            cfg.n_clients
        )));
    }
    if plan.len() != cfg.n_rounds as usize {
        return Err(FederationError::InvalidConfig(format!(
            "plan has {} rounds, config {}",
            plan.len(),
            cfg.n_rounds
        )));
    }

    let mut server = Server {
        sessions: Vec::with_capacity(channels.len()),
        ledger: CostLedger::new(),
        global: M3Model::empty(model_config),
        config: &model_config,
    };

    // session setup: every client introduces itself
    let mut pending = Vec::new();
    for mut channel in channels {
        match channel.recv() {
            Ok((msg @ Message::Hello { client_id, ship_type }, n)) => {
                server.ledger.record_message(0, Direction::ClientToServer, client_id, &msg, n);
                pending.push((client_id, ship_type, channel));
            }
            Ok((other, _)) => {
                server.sessions.extend(pending.into_iter().map(|(client_id, _, channel)| Session { client_id, channel }));
                return Err(server.abort(0, format!("expected HELLO, got {}", other.name()), None));
            }
            Err(e) => {
                server.sessions.extend(pending.into_iter().map(|(client_id, _, channel)| Session { client_id, channel }));
                return Err(server.abort(0, format!("session setup failed: {e}"), None));
            }
        }
    }
    pending.sort_by_key(|(id, _, _)| *id);
    let mut mismatch = None;
    for (i, (client_id, ship_type, channel)) in pending.into_iter().enumerate() {
        if ship_type != model_config.ship_type.code() && mismatch.is_none() {
            mismatch = Some((i, format!("client {client_id} announced ship type code {ship_type}")));
        }
        server.sessions.push(Session { client_id, channel });
    }
    if let Some((i, reason)) = mismatch {
        return Err(server.abort(0, reason, Some((i, error_code::CONFIG_MISMATCH))));
    }
    if let Some(w) = server.sessions.windows(2).find(|w| w[0].client_id == w[1].client_id) {
        let reason = format!("duplicate client id {}", w[0].client_id);
        return Err(server.abort(0, reason, None));
    }

    for (t, chunk) in (1..=cfg.n_rounds).zip(plan.rounds()) {
        let step = (|| {
            if cfg.return_global {
                let model = server.global.to_bytes();
                server.broadcast(t, &Message::GlobalModel { round: t, model })?;
            }
            server.broadcast(
                t,
                &Message::Train {
                    round: t,
                    chunk: chunk.to_string(),
                },
            )
        })();
        if let Err(e) = step {
            return Err(server.abort(t, format!("broadcast failed: {e}"), None));
        }

        let mut uploads = Vec::with_capacity(server.sessions.len());
        let mut failure: Option<(String, Option<(usize, u16)>)> = None;
        for (i, received) in server.collect().into_iter().enumerate() {
            let client_id = server.sessions[i].client_id;
            let (msg, n) = match received {
                Ok(r) => r,
                Err(e) => {
                    failure.get_or_insert((format!("client {client_id}: {e}"), None));
                    continue;
                }
            };
            server.ledger.record_message(t, Direction::ClientToServer, client_id, &msg, n);
            if failure.is_some() {
                continue;
            }
            match msg {
                Message::ClientModel { round, model } if round == t => match M3Model::from_bytes(&model) {
                    Ok(m) if m.config() == server.config => uploads.push(m),
                    Ok(_) => {
                        failure = Some((
                            format!("client {client_id} uploaded a model with a different config"),
                            Some((i, error_code::CONFIG_MISMATCH)),
                        ))
                    }
                    Err(e) => {
                        failure = Some((
                            format!("client {client_id} uploaded an undecodable model: {e}"),
                            Some((i, error_code::PROTOCOL)),
                        ))
                    }
                },
                Message::Error { code, text } => {
                    failure = Some((format!("client {client_id} failed with code {code}: {text}"), None))
                }
                other => {
                    failure = Some((
                        format!("client {client_id} sent {} in round {t}", other.name()),
                        Some((i, error_code::PROTOCOL)),
                    ))
                }
            }
        }
        if let Some((reason, culprit)) = failure {
            return Err(server.abort(t, reason, culprit));
        }

        let mut parts: Vec<&M3Model> = Vec::with_capacity(uploads.len() + 1);
        if !cfg.seed_from_global {
            parts.push(&server.global);
        }
        parts.extend(uploads.iter());
        let next = match aggregate(&parts) {
            Ok(m) => m,
            Err(e) => return Err(server.abort(t, format!("aggregation failed: {e}"), None)),
        };
        server.global = next;

        if let Err(e) = server.broadcast(t, &Message::RoundDone { round: t }) {
            return Err(server.abort(t, format!("broadcast failed: {e}"), None));
        }
    }

    if let Err(e) = server.broadcast(cfg.n_rounds, &Message::Finish) {
        return Err(server.abort(cfg.n_rounds, format!("broadcast failed: {e}"), None));
    }
    Ok(ServerOutcome {
        model: server.global,
        ledger: server.ledger,
    })
}
