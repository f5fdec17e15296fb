//! Line-delimited JSON protocol for driving an environment over stdio.
//!
//! Requests are single-line JSON objects:
//!
//! ```text
//! {"cmd":"info"}               -> {"version":1,"name":"...","obs_dim":7,"n_actions":2}
//! {"cmd":"reset"}              -> {"version":1,"obs":[...],"reward":0.0,"done":false}
//! {"cmd":"step","action":k}    -> {"version":1,"obs":[...],"reward":r,"done":b}
//! ```
//!
//! Failures are answered with `{"version":1,"error":"..."}` and the session
//! continues. Every reply carries the protocol version.

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::env::spec::MdpSpec;
use crate::env::vec_env::{Observation, VecEnv};
use crate::error::{Error, Result};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "lowercase")]
pub enum Request {
    Info,
    Reset,
    Step { action: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReply {
    pub version: u32,
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoReply {
    pub version: u32,
    pub name: String,
    pub obs_dim: usize,
    pub n_actions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReply {
    pub version: u32,
    pub error: String,
}

fn write_line<W: Write, T: Serialize>(w: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Serves a single environment until the reader hits EOF.
pub fn serve<R: BufRead, W: Write>(spec: MdpSpec, seed: u64, reader: R, mut writer: W) -> Result<()> {
    let info = InfoReply {
        version: PROTOCOL_VERSION,
        name: spec.name.clone(),
        obs_dim: spec.obs_dim(),
        n_actions: spec.n_actions,
    };
    let mut env = VecEnv::new(Arc::new(spec), 1, seed)?;
    let mut started = false;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<Request>(&line) {
            Err(e) => Err(format!("bad request: {e}")),
            Ok(Request::Info) => {
                write_line(&mut writer, &info)?;
                continue;
            }
            Ok(Request::Reset) => {
                started = true;
                env.reset(0).map(|obs| (obs, 0.0, false)).map_err(|e| e.to_string())
            }
            Ok(Request::Step { .. }) if !started => Err("step before reset".to_string()),
            Ok(Request::Step { action }) => env
                .step_all(&[action])
                .map(|mut out| (out.observations.remove(0), out.rewards[0], out.dones[0]))
                .map_err(|e| e.to_string()),
        };
        match reply {
            Ok((obs, reward, done)) => write_line(
                &mut writer,
                &StepReply {
                    version: PROTOCOL_VERSION,
                    obs: obs.into_vec(),
                    reward,
                    done,
                },
            )?,
            Err(error) => write_line(
                &mut writer,
                &ErrorReply {
                    version: PROTOCOL_VERSION,
                    error,
                },
            )?,
        }
    }
    Ok(())
}

/// Client side of the protocol, e.g. over a child process's pipes.
pub struct ExternalEnv<R, W> {
    reader: R,
    writer: W,
    line: String,
}

impl<R: BufRead, W: Write> ExternalEnv<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        Self {
            reader,
            writer,
            line: String::new(),
        }
    }

    fn call(&mut self, req: &Request) -> Result<serde_json::Value> {
        write_line(&mut self.writer, req)?;
        self.line.clear();
        if self.reader.read_line(&mut self.line)? == 0 {
            return Err(Error::Protocol("peer closed the stream".into()));
        }
        let value: serde_json::Value = serde_json::from_str(&self.line)?;
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == PROTOCOL_VERSION as u64 => {}
            other => return Err(Error::Protocol(format!("unsupported version {other:?}"))),
        }
        if let Some(err) = value.get("error").and_then(|e| e.as_str()) {
            return Err(Error::Protocol(err.to_string()));
        }
        Ok(value)
    }

    pub fn info(&mut self) -> Result<InfoReply> {
        Ok(serde_json::from_value(self.call(&Request::Info)?)?)
    }

    pub fn reset(&mut self) -> Result<Observation> {
        let reply: StepReply = serde_json::from_value(self.call(&Request::Reset)?)?;
        Ok(Observation::from_vec(reply.obs))
    }

    pub fn step(&mut self, action: usize) -> Result<(Observation, f64, bool)> {
        let reply: StepReply = serde_json::from_value(self.call(&Request::Step { action })?)?;
        Ok((Observation::from_vec(reply.obs), reply.reward, reply.done))
    }
}
