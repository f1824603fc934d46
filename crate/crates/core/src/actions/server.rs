use std::collections::HashMap;
use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use parking_lot::Mutex;

use super::wire::{parse_request, Response, UNKNOWN_ACTION};
use super::ActionFn;

pub type ActionSet = HashMap<String, ActionFn>;

const POLL: Duration = Duration::from_millis(20);

/// A running action server. Dropping it shuts it down.
pub struct ActionServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
    conns: Arc<Mutex<Vec<JoinHandle<()>>>>,
}

/// Serves `actions` over the line protocol, one thread per connection.
pub fn serve_actions(addr: SocketAddr, actions: ActionSet) -> io::Result<ActionServer> {
    let listener = TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let conns: Arc<Mutex<Vec<JoinHandle<()>>>> = Arc::default();
    let actions = Arc::new(actions);
    let accept = {
        let stop = stop.clone();
        let conns = conns.clone();
        thread::Builder::new()
            .name(format!("actions-{}", addr.port()))
            .spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    match listener.accept() {
                        Ok((stream, _)) => {
                            let stop = stop.clone();
                            let actions = actions.clone();
                            let h = thread::spawn(move || {
                                if let Err(e) = connection(stream, &actions, &stop) {
                                    log::debug!("action connection closed: {e}");
                                }
                            });
                            let mut c = conns.lock();
                            c.retain(|h| !h.is_finished());
                            c.push(h);
                        }
                        Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(1)),
                        Err(e) => {
                            log::warn!("accept failed: {e}");
                            thread::sleep(POLL);
                        }
                    }
                }
            })?
    };
    Ok(ActionServer {
        addr,
        stop,
        accept: Some(accept),
        conns,
    })
}

impl ActionServer {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting, lets in-flight requests finish, and joins every
    /// connection thread.
    pub fn shutdown(mut self) {
        self.stop_and_join();
    }

    fn stop_and_join(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
        for h in self.conns.lock().drain(..) {
            let _ = h.join();
        }
    }
}

impl Drop for ActionServer {
    fn drop(&mut self) {
        self.stop_and_join();
    }
}

fn connection(stream: TcpStream, actions: &ActionSet, stop: &AtomicBool) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(POLL))?;
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    // survives read timeouts so a line split across them is not lost
    let mut line = Vec::new();
    loop {
        match reader.read_until(b'\n', &mut line) {
            Ok(0) => return Ok(()),
            Ok(_) if line.last() != Some(&b'\n') => return Ok(()),
            Ok(_) => {
                let text = String::from_utf8_lossy(&line);
                let response = handle(text.trim_end_matches(['\n', '\r']), actions);
                writer.write_all(response.to_line().as_bytes())?;
                line.clear();
            }
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                if stop.load(Ordering::SeqCst) {
                    return Ok(());
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// Answers one request line.
pub(crate) fn handle(line: &str, actions: &ActionSet) -> Response {
    let req = match parse_request(line) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    match actions.get(&req.action) {
        None => Response::err(req.id, UNKNOWN_ACTION),
        Some(f) => match f(&req.args) {
            Ok(v) => Response::ok(req.id, v),
            Err(m) => Response::err(req.id, m),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::builtin;
    use std::io::Read;

    fn set() -> ActionSet {
        let mut s = ActionSet::new();
        s.insert("concat".into(), builtin("concat").unwrap());
        s
    }

    #[test]
    fn pipelined_requests_get_one_response_each() {
        let server = serve_actions("127.0.0.1:0".parse().unwrap(), set()).unwrap();
        let mut s = TcpStream::connect(server.local_addr()).unwrap();
        s.write_all(b"{\"id\":1,\"action\":\"concat\",\"args\":[\"a\",\"b\"]}\n{bad\n{\"id\":3,\"action\":\"zz\",\"args\":[]}\n")
            .unwrap();
        s.shutdown(std::net::Shutdown::Write).unwrap();
        let mut out = String::new();
        s.read_to_string(&mut out).unwrap();
        assert_eq!(
            out,
            "{\"id\":1,\"ok\":true,\"result\":\"ab\"}\n\
             {\"id\":0,\"ok\":false,\"error\":\"malformed request\"}\n\
             {\"id\":3,\"ok\":false,\"error\":\"unknown action\"}\n"
        );
        server.shutdown();
    }

    #[test]
    fn bind_failure_is_reported() {
        let server = serve_actions("127.0.0.1:0".parse().unwrap(), set()).unwrap();
        assert!(serve_actions(server.local_addr(), set()).is_err());
    }
}
