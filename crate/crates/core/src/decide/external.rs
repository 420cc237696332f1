//! External planner transports: a long-lived subprocess speaking one JSON
//! line per query on stdin/stdout, or a TCP endpoint taking one query per
//! connection.

use std::fmt;
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use super::{parse_plan_response, Plan, PlanSource, PlannerFailure, PlannerQuery};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlannerEndpoint {
    Command(String),
    Tcp(String),
}

impl fmt::Display for PlannerEndpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlannerEndpoint::Command(c) => write!(f, "cmd:{c}"),
            PlannerEndpoint::Tcp(a) => write!(f, "tcp:{a}"),
        }
    }
}

struct Process {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl Process {
    fn spawn(cmd: &str) -> Result<Process, PlannerFailure> {
        let mut child = Command::new("sh")
            .arg("-c")
            // exec so that killing the child kills the planner itself
            .arg(format!("exec {cmd}"))
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| PlannerFailure::Transport(format!("cannot start {cmd:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Process { child, stdin, lines })
    }

    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct ExternalPlanner {
    endpoint: PlannerEndpoint,
    timeout: Duration,
    process: Option<Process>,
}

impl ExternalPlanner {
    pub fn new(endpoint: PlannerEndpoint, timeout: Duration) -> Self {
        Self {
            endpoint,
            timeout,
            process: None,
        }
    }

    pub fn endpoint(&self) -> &PlannerEndpoint {
        &self.endpoint
    }

    pub fn plan(&mut self, query: &PlannerQuery) -> Result<Plan, PlannerFailure> {
        let line = query.to_wire();
        let reply = match self.endpoint.clone() {
            PlannerEndpoint::Command(cmd) => self.ask_process(&cmd, &line)?,
            PlannerEndpoint::Tcp(addr) => self.ask_tcp(&addr, &line)?,
        };
        parse_plan_response(&reply, PlanSource::External)
    }

    fn ask_process(&mut self, cmd: &str, line: &str) -> Result<String, PlannerFailure> {
        let mut proc = match self.process.take() {
            Some(p) => p,
            None => Process::spawn(cmd)?,
        };
        let sent = writeln!(proc.stdin, "{line}").and_then(|_| proc.stdin.flush());
        if let Err(e) = sent {
            proc.kill();
            return Err(PlannerFailure::Transport(format!("write failed: {e}")));
        }
        match proc.lines.recv_timeout(self.timeout) {
            Ok(reply) => {
                self.process = Some(proc);
                Ok(reply)
            }
            Err(RecvTimeoutError::Timeout) => {
                // A late reply must not be read as the answer to the next query.
                proc.kill();
                Err(PlannerFailure::Timeout)
            }
            Err(RecvTimeoutError::Disconnected) => {
                proc.kill();
                Err(PlannerFailure::Transport("planner closed its output".into()))
            }
        }
    }

    fn ask_tcp(&self, addr: &str, line: &str) -> Result<String, PlannerFailure> {
        let transport = |e: std::io::Error| PlannerFailure::Transport(format!("{addr}: {e}"));
        let sock = addr
            .to_socket_addrs()
            .map_err(transport)?
            .next()
            .ok_or_else(|| PlannerFailure::Transport(format!("{addr}: no address")))?;
        let mut stream = TcpStream::connect_timeout(&sock, self.timeout).map_err(transport)?;
        stream.set_read_timeout(Some(self.timeout)).map_err(transport)?;
        writeln!(stream, "{line}").map_err(transport)?;
        let mut reply = String::new();
        match BufReader::new(stream).read_line(&mut reply) {
            Ok(0) => Err(PlannerFailure::Transport(format!("{addr}: connection closed"))),
            Ok(_) => Ok(reply),
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => Err(PlannerFailure::Timeout),
            Err(e) => Err(transport(e)),
        }
    }
}

impl Drop for ExternalPlanner {
    fn drop(&mut self) {
        if let Some(p) = self.process.take() {
            p.kill();
        }
    }
}
