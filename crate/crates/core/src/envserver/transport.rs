use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread;

use serde_json::{json, Value};

use super::{obs_message, ServerConfig, Session};
use crate::engine::{Policy, PolicyError, WorldState};

/// Runs one session over a line-oriented byte stream until end of input.
/// Returns the number of requests handled.
pub fn serve_stream(
    reader: impl BufRead,
    mut writer: impl Write,
    config: Arc<ServerConfig>,
    session_id: u64,
) -> io::Result<u64> {
    let mut session = Session::new(config, session_id);
    let mut handled = 0;
    let result = (|| {
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let response = session.handle_line(&line);
            serde_json::to_writer(&mut writer, &response)?;
            writer.write_all(b"\n")?;
            writer.flush()?;
            handled += 1;
        }
        Ok(())
    })();
    session.flush();
    result.map(|()| handled)
}

pub fn serve_stdio(config: Arc<ServerConfig>) -> io::Result<u64> {
    let stdin = io::stdin();
    serve_stream(stdin.lock(), io::stdout().lock(), config, 0)
}

pub fn bind_tcp(addr: impl ToSocketAddrs) -> io::Result<TcpListener> {
    TcpListener::bind(addr)
}

/// Accepts connections, one session thread each. Stops after
/// `max_connections` accepted connections when given, waiting for their
/// sessions to close.
pub fn serve_listener(
    listener: TcpListener,
    config: Arc<ServerConfig>,
    max_connections: Option<u64>,
) -> io::Result<()> {
    let next_id = AtomicU64::new(0);
    let mut handles = Vec::new();
    for stream in listener.incoming() {
        let stream = stream?;
        let id = next_id.fetch_add(1, Ordering::Relaxed);
        let config = config.clone();
        handles.push(thread::spawn(move || {
            let reader = match stream.try_clone() {
                Ok(s) => BufReader::new(s),
                Err(_) => return,
            };
            let _ = serve_stream(reader, BufWriter::new(stream), config, id);
        }));
        if max_connections.is_some_and(|m| id + 1 >= m) {
            break;
        }
    }
    for h in handles {
        let _ = h.join();
    }
    Ok(())
}

/// Policy answered by an external agent over TCP.
///
/// The simulator drives: it sends an `obs` message per decision and
/// expects a `{"type":"step","action":k}` line back; it sends
/// `episode_end` when the episode is over and expects no reply.
pub struct ExternPolicy {
    addr: String,
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl ExternPolicy {
    pub fn connect(addr: &str) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        let reader = BufReader::new(stream.try_clone()?);
        Ok(Self { addr: addr.to_string(), reader, writer: BufWriter::new(stream) })
    }

    fn send(&mut self, v: &Value) -> Result<(), PolicyError> {
        let io = |e: io::Error| PolicyError(format!("extern {}: {e}", self.addr));
        let mut line = v.to_string();
        line.push('\n');
        self.writer.write_all(line.as_bytes()).map_err(io)?;
        self.writer.flush().map_err(|e| PolicyError(format!("extern {}: {e}", self.addr)))
    }
}

impl Policy for ExternPolicy {
    fn name(&self) -> String {
        format!("extern:{}", self.addr)
    }

    fn act(&mut self, world: &WorldState) -> Result<usize, PolicyError> {
        let msg = obs_message(world, None, 0.0, Vec::new());
        self.send(&serde_json::to_value(msg).map_err(|e| PolicyError(e.to_string()))?)?;
        let mut line = String::new();
        let n = self.reader.read_line(&mut line).map_err(|e| PolicyError(format!("extern {}: {e}", self.addr)))?;
        if n == 0 {
            return Err(PolicyError(format!("extern {}: connection closed", self.addr)));
        }
        let v: Value = serde_json::from_str(&line).map_err(|e| PolicyError(format!("extern reply: {e}")))?;
        match (v.get("type").and_then(Value::as_str), v.get("action").and_then(Value::as_u64)) {
            (Some("step"), Some(a)) => Ok(a as usize),
            _ => Err(PolicyError(format!("extern reply is not a step message: {}", line.trim()))),
        }
    }

    fn end_episode(&mut self, world: &WorldState) -> Result<(), PolicyError> {
        self.send(&json!({ "type": "episode_end", "metrics": world.metrics() }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::fixtures;

    #[test]
    fn stream_session_answers_every_line() {
        let input = "{\"type\":\"hello\",\"instance_name\":\"T1\"}\n\ngarbage\n{\"type\":\"reset\",\"seed\":42}\n";
        let mut out = Vec::new();
        let n = serve_stream(input.as_bytes(), &mut out, Arc::new(ServerConfig::default()), 0).unwrap();
        assert_eq!(n, 3);
        let lines: Vec<Value> =
            String::from_utf8(out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines[0]["type"], "hello");
        assert_eq!(lines[1]["type"], "error");
        assert_eq!(lines[2]["type"], "obs");
        assert_eq!(lines[2]["active_truck"], 0);
    }

    #[test]
    fn tcp_sessions_are_isolated() {
        let listener = bind_tcp("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let config = Arc::new(ServerConfig { default_instance: Some(Arc::new(fixtures::t1())), trace_dir: None });
        let server = thread::spawn(move || serve_listener(listener, config, Some(2)));

        let open = || {
            let s = TcpStream::connect(addr).unwrap();
            (BufReader::new(s.try_clone().unwrap()), s)
        };
        let ask = |c: &mut (BufReader<TcpStream>, TcpStream), msg: &str| -> Value {
            c.1.write_all(format!("{msg}\n").as_bytes()).unwrap();
            let mut line = String::new();
            c.0.read_line(&mut line).unwrap();
            serde_json::from_str(&line).unwrap()
        };
        let mut a = open();
        let mut b = open();
        let a0 = ask(&mut a, r#"{"type":"reset","seed":1}"#);
        let b0 = ask(&mut b, r#"{"type":"reset","seed":1}"#);
        assert_eq!(a0, b0);
        let a1 = ask(&mut a, r#"{"type":"step","action":1}"#);
        // b has not stepped; an interleaved step on b matches a's
        let b1 = ask(&mut b, r#"{"type":"step","action":1}"#);
        assert_eq!(a1, b1);
        drop(a);
        drop(b);
        server.join().unwrap().unwrap();
    }
}
