//! Newline-delimited JSON sign-query protocol over TCP.
//!
//! ```text
//! -> {"hello":{"dim":m}}            <- {"ok":{"dim":m}} | {"err":"dim_mismatch"}
//! -> {"id":7,"x":[0.5,0.0]}         <- {"id":7,"sign":1}
//! -> anything else                  <- {"err":"bad_request"}
//! ```
//!
//! A zero score is sent as `1`, so the remote side never sees a tie.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{DifferenceOracle, Sign, Victim, VictimError, VictimSpec};
use crate::numerics::RealVector;

#[derive(Serialize, Deserialize)]
struct Dim {
    dim: usize,
}

#[derive(Serialize)]
struct Hello {
    hello: Dim,
}

#[derive(Serialize)]
struct HelloOk {
    ok: Dim,
}

#[derive(Serialize)]
struct Query<'a> {
    id: u64,
    x: &'a [f64],
}

#[derive(Serialize, Deserialize)]
struct SignReply {
    id: u64,
    sign: i8,
}

#[derive(Serialize, Deserialize)]
struct ErrorReply {
    err: String,
}

const BAD_REQUEST: &str = "bad_request";
const DIM_MISMATCH: &str = "dim_mismatch";

fn encode_line<T: Serialize>(msg: &T) -> Vec<u8> {
    let mut line = serde_json::to_vec(msg).expect("protocol messages always serialise");
    line.push(b'\n');
    line
}

/// Answer one request line. Pure so it can be tested without sockets.
fn respond(victim: &Victim, line: &str) -> Vec<u8> {
    let bad = || encode_line(&ErrorReply { err: BAD_REQUEST.into() });
    let Ok(Value::Object(map)) = serde_json::from_str::<Value>(line) else {
        return bad();
    };
    let m = victim.dim();
    if map.len() == 1 {
        if let Some(hello) = map.get("hello") {
            return match serde_json::from_value::<Dim>(hello.clone()) {
                Ok(Dim { dim }) if dim == m => encode_line(&HelloOk { ok: Dim { dim } }),
                Ok(_) => encode_line(&ErrorReply { err: DIM_MISMATCH.into() }),
                Err(_) => bad(),
            };
        }
    }
    if map.len() != 2 {
        return bad();
    }
    let Some(id) = map.get("id").and_then(Value::as_u64) else {
        return bad();
    };
    let Some(Value::Array(xs)) = map.get("x") else {
        return bad();
    };
    if xs.len() != m {
        return bad();
    }
    let Some(x) = xs.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>() else {
        return bad();
    };
    let sign = if Sign::of_score(victim.value(&RealVector::from_vec(x))).is_adversarial() { 1 } else { -1 };
    encode_line(&SignReply { id, sign })
}

fn handle_connection(victim: Arc<Victim>, stream: TcpStream) -> io::Result<()> {
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        let request = line.strip_suffix('\n').unwrap_or(&line);
        writer.write_all(&respond(&victim, request))?;
    }
}

/// TCP server answering sign queries for one local victim.
pub struct VictimServer {
    listener: TcpListener,
    victim: Arc<Victim>,
}

impl VictimServer {
    pub fn bind<A: ToSocketAddrs>(victim: Victim, address: A) -> io::Result<VictimServer> {
        Ok(VictimServer { listener: TcpListener::bind(address)?, victim: Arc::new(victim) })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accept connections until the process ends, one thread per connection.
    pub fn run(self) -> io::Result<()> {
        self.accept_loop(&AtomicBool::new(false))
    }

    /// Serve on a background thread; dropping the handle stops accepting.
    pub fn spawn(self) -> io::Result<ServerHandle> {
        let address = self.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let thread = std::thread::spawn(move || {
            if let Err(e) = self.accept_loop(&flag) {
                log::error!("victim server stopped: {e}");
            }
        });
        Ok(ServerHandle { address, stop, thread: Some(thread) })
    }

    fn accept_loop(&self, stop: &AtomicBool) -> io::Result<()> {
        for stream in self.listener.incoming() {
            if stop.load(Ordering::SeqCst) {
                break;
            }
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_else(|_| "?".into());
            log::info!("connection from {peer}");
            let _ = stream.set_nodelay(true);
            let victim = self.victim.clone();
            std::thread::spawn(move || {
                if let Err(e) = handle_connection(victim, stream) {
                    log::debug!("connection {peer} closed: {e}");
                }
            });
        }
        Ok(())
    }
}

pub struct ServerHandle {
    address: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.address
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the blocking accept so the loop sees the flag.
        if let Ok(s) = TcpStream::connect(self.address) {
            let _ = s.shutdown(Shutdown::Both);
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Bind a server for a local victim spec.
pub fn serve_victim<A: ToSocketAddrs>(spec: &VictimSpec, address: A) -> Result<VictimServer, VictimError> {
    if spec.is_remote() {
        return Err(VictimError::Invalid("cannot serve a remote victim".into()));
    }
    Ok(VictimServer::bind(spec.build()?, address)?)
}

struct Connection {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    next_id: u64,
}

impl Connection {
    fn read_reply(&mut self) -> Result<Value, VictimError> {
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "server closed the connection").into());
        }
        serde_json::from_str(&line).map_err(|e| VictimError::Protocol(format!("unparseable reply: {e}")))
    }
}

/// Sign oracle backed by a [`VictimServer`]. Requests on one client are
/// serialised; use one client per worker for parallel querying.
pub struct RemoteOracle {
    connection: Mutex<Connection>,
    dim: usize,
    queries: AtomicU64,
}

/// Connect and handshake. `timeout_ms == 0` disables I/O timeouts.
pub fn connect_remote_victim(address: &str, m: usize, timeout_ms: u64) -> Result<RemoteOracle, VictimError> {
    let timeout = (timeout_ms > 0).then(|| Duration::from_millis(timeout_ms));
    let mut last_err = None;
    let mut stream = None;
    for addr in address.to_socket_addrs()? {
        let attempt = match timeout {
            Some(t) => TcpStream::connect_timeout(&addr, t),
            None => TcpStream::connect(addr),
        };
        match attempt {
            Ok(s) => {
                stream = Some(s);
                break;
            }
            Err(e) => last_err = Some(e),
        }
    }
    let stream = match (stream, last_err) {
        (Some(s), _) => s,
        (None, Some(e)) => return Err(e.into()),
        (None, None) => {
            return Err(io::Error::new(io::ErrorKind::NotFound, format!("{address} did not resolve")).into())
        }
    };
    stream.set_read_timeout(timeout)?;
    stream.set_write_timeout(timeout)?;
    stream.set_nodelay(true)?;
    let mut connection = Connection { reader: BufReader::new(stream.try_clone()?), writer: stream, next_id: 0 };
    connection.writer.write_all(&encode_line(&Hello { hello: Dim { dim: m } }))?;
    let reply = connection.read_reply()?;
    match reply.get("ok").and_then(|ok| ok.get("dim")).and_then(Value::as_u64) {
        Some(d) if d == m as u64 => {}
        _ => {
            let reason = reply.get("err").and_then(Value::as_str).unwrap_or("unexpected reply").to_string();
            return Err(VictimError::Handshake(format!("server refused dim {m}: {reason}")));
        }
    }
    Ok(RemoteOracle { connection: Mutex::new(connection), dim: m, queries: AtomicU64::new(0) })
}

impl DifferenceOracle for RemoteOracle {
    fn dim(&self) -> usize {
        self.dim
    }

    fn query_sign(&self, x: &RealVector) -> Result<Sign, VictimError> {
        if x.len() != self.dim {
            return Err(VictimError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(VictimError::Protocol("non-finite coordinate cannot be sent".into()));
        }
        let mut conn = self.connection.lock().unwrap_or_else(|p| p.into_inner());
        let id = conn.next_id;
        conn.next_id += 1;
        conn.writer.write_all(&encode_line(&Query { id, x: x.as_slice() }))?;
        loop {
            let reply = conn.read_reply()?;
            if let Some(err) = reply.get("err") {
                return Err(VictimError::Protocol(format!("server error {err}")));
            }
            let reply: SignReply = serde_json::from_value(reply)
                .map_err(|e| VictimError::Protocol(format!("bad sign reply: {e}")))?;
            // Replies to requests that timed out earlier may still arrive.
            if reply.id < id {
                continue;
            }
            if reply.id != id {
                return Err(VictimError::Protocol(format!("reply id {} for request {id}", reply.id)));
            }
            let sign = match reply.sign {
                1 => Sign::Positive,
                -1 => Sign::Negative,
                s => return Err(VictimError::Protocol(format!("sign {s} is not ±1"))),
            };
            self.queries.fetch_add(1, Ordering::Relaxed);
            return Ok(sign);
        }
    }

    fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }
}
