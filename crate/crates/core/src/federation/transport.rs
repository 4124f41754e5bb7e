use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::time::Duration;

use super::protocol::{read_frame, write_frame, Message, FRAME_HEADER_LEN};
use super::FederationError;

/// A bidirectional message pipe. Both methods report the exact number of
/// frame bytes moved, which is what the cost ledger records.
pub trait Channel: Send {
    fn send(&mut self, msg: &Message) -> Result<u64, FederationError>;
    fn recv(&mut self) -> Result<(Message, u64), FederationError>;
}

/// Framed messages over any reliable byte stream.
pub struct FramedStream<R: Read, W: Write> {
    reader: BufReader<R>,
    writer: BufWriter<W>,
}

impl<R: Read, W: Write> FramedStream<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        Self {
            reader: BufReader::new(reader),
            writer: BufWriter::new(writer),
        }
    }
}

impl FramedStream<TcpStream, TcpStream> {
    pub fn tcp(stream: TcpStream) -> io::Result<Self> {
        stream.set_nodelay(true)?;
        let reader = stream.try_clone()?;
        Ok(Self::new(reader, stream))
    }
}

impl<R: Read + Send, W: Write + Send> Channel for FramedStream<R, W> {
    fn send(&mut self, msg: &Message) -> Result<u64, FederationError> {
        Ok(write_frame(&mut self.writer, msg)?)
    }

    fn recv(&mut self) -> Result<(Message, u64), FederationError> {
        read_frame(&mut self.reader)
    }
}

/// Connects to `addr`, retrying once after `backoff` if the first attempt fails.
pub fn connect_tcp<A: ToSocketAddrs>(
    addr: A,
    backoff: Duration,
) -> Result<FramedStream<TcpStream, TcpStream>, FederationError> {
    let addrs: Vec<SocketAddr> = addr.to_socket_addrs()?.collect();
    let attempt = || TcpStream::connect(addrs.as_slice());
    let stream = match attempt() {
        Ok(s) => s,
        Err(_) => {
            std::thread::sleep(backoff);
            attempt()?
        }
    };
    Ok(FramedStream::tcp(stream)?)
}

/// In-process channel endpoint. Frames travel fully encoded, so byte counts
/// match a stream transport exactly.
pub struct InProcessChannel {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

/// Two connected endpoints.
pub fn in_process_pair() -> (InProcessChannel, InProcessChannel) {
    let (a_tx, b_rx) = channel();
    let (b_tx, a_rx) = channel();
    (InProcessChannel { tx: a_tx, rx: a_rx }, InProcessChannel { tx: b_tx, rx: b_rx })
}

fn disconnected() -> FederationError {
    FederationError::Transport(io::Error::new(io::ErrorKind::UnexpectedEof, "peer disconnected"))
}

impl Channel for InProcessChannel {
    fn send(&mut self, msg: &Message) -> Result<u64, FederationError> {
        let frame = msg.encode();
        let n = frame.len() as u64;
        self.tx.send(frame).map_err(|_| disconnected())?;
        Ok(n)
    }

    fn recv(&mut self) -> Result<(Message, u64), FederationError> {
        let frame = self.rx.recv().map_err(|_| disconnected())?;
        debug_assert!(frame.len() >= FRAME_HEADER_LEN);
        let n = frame.len() as u64;
        Ok((Message::decode(&frame)?, n))
    }
}

impl<C: Channel + ?Sized> Channel for Box<C> {
    fn send(&mut self, msg: &Message) -> Result<u64, FederationError> {
        (**self).send(msg)
    }

    fn recv(&mut self) -> Result<(Message, u64), FederationError> {
        (**self).recv()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::net::TcpListener;

    #[test]
    fn in_process_counts_frame_bytes() {
        let (mut a, mut b) = in_process_pair();
        let m = Message::Train {
            round: 1,
            chunk: "2018-07-01/2018-07-01".into(),
        };
        let sent = a.send(&m).unwrap();
        let (got, received) = b.recv().unwrap();
        assert_eq!(got, m);
        assert_eq!(sent, received);
        assert_eq!(sent, 5 + 4 + 21);
        drop(a);
        assert!(matches!(b.recv(), Err(FederationError::Transport(_))));
    }

    #[test]
    fn tcp_matches_in_process() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            let (s, _) = listener.accept().unwrap();
            let mut ch = FramedStream::tcp(s).unwrap();
            let (m, n) = ch.recv().unwrap();
            ch.send(&Message::RoundDone { round: 1 }).unwrap();
            (m, n)
        });
        let mut c = connect_tcp(addr, Duration::from_millis(50)).unwrap();
        let m = Message::ClientModel {
            round: 4,
            model: vec![9; 1000],
        };
        let sent = c.send(&m).unwrap();
        assert_eq!(c.recv().unwrap().0, Message::RoundDone { round: 1 });
        let (got, n) = server.join().unwrap();
        assert_eq!((got, n), (m.clone(), sent));
        assert_eq!(sent, m.encode().len() as u64);
    }

    #[test]
    fn connect_failure_after_retry() {
        let addr = {
            let l = TcpListener::bind("127.0.0.1:0").unwrap();
            l.local_addr().unwrap()
        };
        assert!(connect_tcp(addr, Duration::from_millis(10)).is_err());
    }
}
