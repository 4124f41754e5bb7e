use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::time::Duration;

use super::{
    connect_tcp, in_process_pair, run_client, run_server, Channel, ChunkSource, ClientOutcome, CostLedger,
    FederationConfig, FederationError, FramedStream, ServerOutcome, Transport,
};
use crate::ingestion::RoundPlan;
use crate::model::{M3Model, ModelConfig};

const CONNECT_BACKOFF: Duration = Duration::from_millis(200);

#[derive(Debug, Clone)]
pub struct FederationOutcome {
    pub model: M3Model,
    /// The server's view: every frame of every session.
    pub ledger: CostLedger,
    /// Client outcomes by client id, which is `1..=N` in source order.
    pub clients: Vec<ClientOutcome>,
}

/// Runs client `i + 1` on `client_channels[i]` in a scoped thread and the
/// server on the current one. The server's error takes precedence.
fn run_with_clients<S: Channel, C: Channel>(
    cfg: &FederationConfig,
    model_config: ModelConfig,
    plan: &RoundPlan,
    sources: &[&dyn ChunkSource],
    server_channels: Vec<S>,
    client_channels: Vec<C>,
) -> Result<FederationOutcome, FederationError> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = client_channels
            .into_iter()
            .zip(sources)
            .enumerate()
            .map(|(i, (mut ch, source))| {
                scope.spawn(move || run_client(&mut ch, i as u32 + 1, model_config, *source, cfg.seed_from_global))
            })
            .collect();
        let server = run_server(cfg, model_config, plan, server_channels);
        let clients: Vec<Result<ClientOutcome, FederationError>> = handles
            .into_iter()
            .map(|h| h.join().expect("client thread panicked"))
            .collect();
        let server = server?;
        let clients = clients.into_iter().collect::<Result<Vec<_>, _>>()?;
        Ok(FederationOutcome {
            model: server.model,
            ledger: server.ledger,
            clients,
        })
    })
}

fn check_sources(cfg: &FederationConfig, sources: &[&dyn ChunkSource]) -> Result<(), FederationError> {
    cfg.validate()?;
    if sources.len() != cfg.n_clients as usize {
        return Err(FederationError::InvalidConfig(format!(
            "{} data sources for {} clients",
            sources.len(),
            cfg.n_clients
        )));
    }
    Ok(())
}

/// Server and clients in one process, connected by in-memory channels.
pub fn run_in_process(
    cfg: &FederationConfig,
    model_config: ModelConfig,
    plan: &RoundPlan,
    sources: &[&dyn ChunkSource],
) -> Result<FederationOutcome, FederationError> {
    check_sources(cfg, sources)?;
    let (server_ends, client_ends): (Vec<_>, Vec<_>) = sources.iter().map(|_| in_process_pair()).unzip();
    run_with_clients(cfg, model_config, plan, sources, server_ends, client_ends)
}

/// Accepts exactly `n` TCP sessions.
pub fn accept_sessions(
    listener: &TcpListener,
    n: usize,
) -> Result<Vec<FramedStream<TcpStream, TcpStream>>, FederationError> {
    (0..n)
        .map(|_| {
            let (stream, _) = listener.accept()?;
            Ok(FramedStream::tcp(stream)?)
        })
        .collect()
}

/// Server and clients in one process, connected over TCP on `listen`.
/// Clients connect before the server accepts; the listen backlog holds them.
pub fn run_tcp_loopback<A: ToSocketAddrs>(
    cfg: &FederationConfig,
    model_config: ModelConfig,
    plan: &RoundPlan,
    sources: &[&dyn ChunkSource],
    listen: A,
) -> Result<FederationOutcome, FederationError> {
    check_sources(cfg, sources)?;
    let listener = TcpListener::bind(listen)?;
    let addr = listener.local_addr()?;
    let client_ends = sources
        .iter()
        .map(|_| connect_tcp(addr, CONNECT_BACKOFF))
        .collect::<Result<Vec<_>, _>>()?;
    let server_ends = accept_sessions(&listener, sources.len())?;
    run_with_clients(cfg, model_config, plan, sources, server_ends, client_ends)
}

/// Dispatches on `cfg.transport`.
pub fn run_federated(
    cfg: &FederationConfig,
    model_config: ModelConfig,
    plan: &RoundPlan,
    sources: &[&dyn ChunkSource],
) -> Result<FederationOutcome, FederationError> {
    match cfg.transport {
        Transport::InProcess => run_in_process(cfg, model_config, plan, sources),
        Transport::Tcp => run_tcp_loopback(cfg, model_config, plan, sources, cfg.listen_address.as_str()),
    }
}

/// Binds `cfg.listen_address`, waits for `cfg.n_clients` clients and serves
/// the whole federation. `on_bound` sees the bound address before accepting.
pub fn serve<F: FnOnce(std::net::SocketAddr)>(
    cfg: &FederationConfig,
    model_config: ModelConfig,
    plan: &RoundPlan,
    on_bound: F,
) -> Result<ServerOutcome, FederationError> {
    cfg.validate()?;
    let listener = TcpListener::bind(cfg.listen_address.as_str())?;
    on_bound(listener.local_addr()?);
    let sessions = accept_sessions(&listener, cfg.n_clients as usize)?;
    run_server(cfg, model_config, plan, sessions)
}
