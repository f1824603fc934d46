use std::collections::HashMap;
use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::sync::atomic::{AtomicU64, Ordering};
use std::thread;
use std::time::Duration;

use parking_lot::Mutex;

use super::wire::{Request, Response};
use super::{ActionError, NetDelay};
use crate::value::ContextValue;

/// One try plus two retries, no backoff.
pub const REMOTE_ATTEMPTS: usize = 3;

const CONNECT_TIMEOUT: Duration = Duration::from_secs(1);
const IO_TIMEOUT: Duration = Duration::from_secs(60);

struct Conn {
    reader: BufReader<TcpStream>,
}

/// Idle connections per remote address. A connection is held by exactly
/// one call at a time.
pub struct ConnectionPool {
    idle: Mutex<HashMap<SocketAddr, Vec<Conn>>>,
    next_id: AtomicU64,
}

impl Default for ConnectionPool {
    fn default() -> Self {
        ConnectionPool {
            idle: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        }
    }
}

impl ConnectionPool {
    pub fn call(
        &self,
        addr: SocketAddr,
        name: &str,
        args: &[ContextValue],
        delay: NetDelay,
    ) -> Result<ContextValue, ActionError> {
        self.try_call(addr, name, args, delay)
            .unwrap_or_else(|last| Err(unreachable(name, addr, &last)))
    }

    /// Like [`call`](Self::call), but a transport failure after every
    /// attempt is returned as the outer error so the caller may re-dispatch.
    pub(crate) fn try_call(
        &self,
        addr: SocketAddr,
        name: &str,
        args: &[ContextValue],
        delay: NetDelay,
    ) -> Result<Result<ContextValue, ActionError>, String> {
        let req = Request {
            id: self.next_id.fetch_add(1, Ordering::Relaxed),
            action: name.to_owned(),
            args: args.to_vec(),
        };
        let line = req.to_line();
        let mut last = String::new();
        for _ in 0..REMOTE_ATTEMPTS {
            match self.exchange(addr, &line, req.id) {
                Ok((resp, resp_len)) => {
                    let d = delay.for_bytes(line.len() + resp_len);
                    if !d.is_zero() {
                        thread::sleep(d);
                    }
                    return Ok(match resp {
                        Response { ok: true, result, .. } => Ok(result.unwrap_or_default()),
                        Response { error, .. } => Err(ActionError::failure(
                            name,
                            error.unwrap_or_else(|| "remote error".into()),
                        )),
                    });
                }
                Err(e) => {
                    // a failed connection suggests its idle siblings are stale too
                    self.idle.lock().remove(&addr);
                    last = e.to_string();
                }
            }
        }
        Err(last)
    }

    fn exchange(&self, addr: SocketAddr, line: &str, id: u64) -> io::Result<(Response, usize)> {
        let pooled = self.idle.lock().get_mut(&addr).and_then(Vec::pop);
        let mut conn = match pooled {
            Some(c) => c,
            None => {
                let s = TcpStream::connect_timeout(&addr, CONNECT_TIMEOUT)?;
                s.set_nodelay(true)?;
                s.set_read_timeout(Some(IO_TIMEOUT))?;
                Conn {
                    reader: BufReader::new(s),
                }
            }
        };
        conn.reader.get_mut().write_all(line.as_bytes())?;
        let mut buf = String::new();
        if conn.reader.read_line(&mut buf)? == 0 {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "connection closed"));
        }
        let resp: Response = serde_json::from_str(buf.trim_end())
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        if resp.id != id {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("response id {} for request {id}", resp.id),
            ));
        }
        self.idle.lock().entry(addr).or_default().push(conn);
        Ok((resp, buf.len()))
    }
}

pub(crate) fn unreachable(name: &str, addr: SocketAddr, last: &str) -> ActionError {
    ActionError::failure(
        name,
        format!("remote call to {addr} failed after {REMOTE_ATTEMPTS} attempts: {last}"),
    )
}
