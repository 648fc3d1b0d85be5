//! Agent bridge: newline-delimited JSON over TCP.
//!
//! One connection owns one session and one environment instance. Every
//! request gets a reply; malformed or illegal requests produce an `error`
//! message and leave the session (and any running episode) intact.
//!
//! Requests:   {"type":"hello"}
//!             {"type":"reset","seed":7,"config":{...}}    (both optional)
//!             {"type":"act","actions":{"0":0,"5":2}}
//! Responses:  hello, obs, reward, done, error — see the README for
//!             byte-exact examples. An `act` is answered by `reward`
//!             followed by `obs`, or by `done` when the episode ends.

use edgesim_core::{ConfigFile, Environment, EpisodeMetrics, NodeId, SimConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicU64, Ordering};

static SESSION_COUNTER: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Response {
    Hello {
        session: String,
        agents: Vec<NodeId>,
        obs_width: usize,
    },
    Obs {
        session: String,
        time: u64,
        observations: BTreeMap<String, Vec<f64>>,
        masks: BTreeMap<String, Vec<bool>>,
    },
    Reward {
        session: String,
        time: u64,
        rewards: BTreeMap<String, f64>,
    },
    Done {
        session: String,
        metrics: WireMetrics,
    },
    Error {
        session: String,
        reason: String,
    },
}

/// Episode metrics as sent over the wire on `done`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WireMetrics {
    pub generated: u64,
    pub completed: u64,
    pub dropped_overflow: u64,
    pub dropped_deadline: u64,
    pub overloads_by_node: BTreeMap<String, u64>,
    pub response_times: Vec<u64>,
    pub reward_by_agent: BTreeMap<String, f64>,
    pub resident_at_end: u64,
}

impl WireMetrics {
    pub fn from_metrics(m: &EpisodeMetrics) -> Self {
        Self {
            generated: m.generated,
            completed: m.completed,
            dropped_overflow: m.dropped_overflow,
            dropped_deadline: m.dropped_deadline,
            overloads_by_node: m
                .overloads_by_node
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
            response_times: m.response_times.clone(),
            reward_by_agent: m
                .reward_by_agent
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
            resident_at_end: m.resident_at_end,
        }
    }

    pub fn to_metrics(&self) -> EpisodeMetrics {
        EpisodeMetrics {
            generated: self.generated,
            completed: self.completed,
            dropped_overflow: self.dropped_overflow,
            dropped_deadline: self.dropped_deadline,
            overloads_by_node: self
                .overloads_by_node
                .iter()
                .map(|(k, v)| (k.parse().expect("numeric node id"), *v))
                .collect(),
            response_times: self.response_times.clone(),
            reward_by_agent: self
                .reward_by_agent
                .iter()
                .map(|(k, v)| (k.parse().expect("numeric node id"), *v))
                .collect(),
            resident_at_end: self.resident_at_end,
        }
    }
}

#[derive(Debug, Deserialize)]
struct ResetPayload {
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    config: Option<ConfigFile>,
}

#[derive(Debug, Deserialize)]
struct ActPayload {
    actions: BTreeMap<String, usize>,
}

/// Serves sessions forever; one thread per connection.
pub fn serve(listener: TcpListener, base_config: SimConfig) -> std::io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let config = base_config.clone();
        std::thread::spawn(move || {
            let session = format!("s{}", SESSION_COUNTER.fetch_add(1, Ordering::SeqCst));
            // A dropped/half-closed connection just ends the session.
            let _ = handle_session(stream, config, session);
        });
    }
    Ok(())
}

fn send(stream: &mut TcpStream, response: &Response) -> std::io::Result<()> {
    let mut line = serde_json::to_string(response).expect("serializable response");
    line.push('\n');
    stream.write_all(line.as_bytes())?;
    stream.flush()
}

fn handle_session(
    stream: TcpStream,
    base_config: SimConfig,
    session: String,
) -> std::io::Result<()> {
    let reader = BufReader::new(stream.try_clone()?);
    let mut stream = stream;
    let mut env: Option<Environment> = None;

    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let responses = handle_line(&line, &base_config, &mut env, &session);
        for response in responses {
            send(&mut stream, &response)?;
        }
    }
    Ok(())
}

fn error(session: &str, reason: impl Into<String>) -> Vec<Response> {
    vec![Response::Error {
        session: session.to_string(),
        reason: reason.into(),
    }]
}

fn obs_response(env: &Environment, session: &str) -> Response {
    let observations = env
        .observations()
        .into_iter()
        .map(|(a, o)| (a.to_string(), o.values))
        .collect();
    let masks = env
        .agents()
        .iter()
        .map(|&a| (a.to_string(), env.action_mask(a)))
        .collect();
    Response::Obs {
        session: session.to_string(),
        time: env.state().time(),
        observations,
        masks,
    }
}

fn handle_line(
    line: &str,
    base_config: &SimConfig,
    env: &mut Option<Environment>,
    session: &str,
) -> Vec<Response> {
    let value: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return error(session, format!("malformed message: {e}")),
    };
    let Some(kind) = value.get("type").and_then(Value::as_str) else {
        return error(session, "missing message type");
    };

    match kind {
        "hello" => {
            let probe = match env {
                Some(e) => e.agents().to_vec(),
                None => base_config.controllers(),
            };
            let obs_width = match env {
                Some(e) => e.obs_width(),
                None => (1 + base_config.max_neighbors) * edgesim_core::env::BLOCK_FIELDS + 1,
            };
            vec![Response::Hello {
                session: session.to_string(),
                agents: probe,
                obs_width,
            }]
        }
        "reset" => {
            let payload: ResetPayload = match serde_json::from_value(value) {
                Ok(p) => p,
                Err(e) => return error(session, format!("bad reset payload: {e}")),
            };
            let config = match payload.config {
                Some(file) => match file.build(None) {
                    Ok(c) => c,
                    Err(e) => return error(session, format!("bad inline config: {e}")),
                },
                None => base_config.clone(),
            };
            let mut new_env = match Environment::new(config) {
                Ok(e) => e,
                Err(e) => return error(session, e.to_string()),
            };
            new_env.reset(payload.seed);
            let response = obs_response(&new_env, session);
            *env = Some(new_env);
            vec![response]
        }
        "act" => {
            let payload: ActPayload = match serde_json::from_value(value) {
                Ok(p) => p,
                Err(e) => return error(session, format!("bad act payload: {e}")),
            };
            let Some(active) = env.as_mut() else {
                return error(session, "no active episode: send reset first");
            };
            let mut actions: BTreeMap<NodeId, usize> = BTreeMap::new();
            for (key, index) in &payload.actions {
                match key.parse::<NodeId>() {
                    Ok(agent) => {
                        actions.insert(agent, *index);
                    }
                    Err(_) => return error(session, format!("non-numeric agent id: {key}")),
                }
            }
            for &agent in active.agents() {
                if !actions.contains_key(&agent) {
                    return error(
                        session,
                        format!("incomplete joint action: missing agent {agent}"),
                    );
                }
            }
            let step = match active.step(&actions) {
                Ok(s) => s,
                Err(e) => return error(session, e.to_string()),
            };
            let time = active.state().time();
            let rewards = step
                .rewards
                .iter()
                .map(|(a, r)| (a.to_string(), *r))
                .collect();
            let mut out = vec![Response::Reward {
                session: session.to_string(),
                time,
                rewards,
            }];
            if step.done {
                out.push(Response::Done {
                    session: session.to_string(),
                    metrics: WireMetrics::from_metrics(active.metrics()),
                });
            } else {
                out.push(obs_response(active, session));
            }
            out
        }
        other => error(session, format!("unknown message type: {other}")),
    }
}

/// Drives a scripted session over a real socket: reset, then `steps`
/// all-zero joint actions. Returns the final metrics from the `done`
/// message. Used by tests and as a client reference implementation.
pub fn scripted_local_session(addr: &str, seed: Option<u64>) -> anyhow::Result<WireMetrics> {
    let stream = TcpStream::connect(addr)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut stream = stream;
    let mut line = String::new();

    let send_line = |stream: &mut TcpStream, msg: String| -> anyhow::Result<()> {
        stream.write_all(msg.as_bytes())?;
        stream.write_all(b"\n")?;
        stream.flush()?;
        Ok(())
    };

    send_line(&mut stream, r#"{"type":"hello"}"#.to_string())?;
    line.clear();
    reader.read_line(&mut line)?;
    let hello: Value = serde_json::from_str(&line)?;
    anyhow::ensure!(hello["type"] == "hello", "expected hello, got {line}");
    let agents: Vec<u64> = serde_json::from_value(hello["agents"].clone())?;

    let reset = match seed {
        Some(s) => format!(r#"{{"type":"reset","seed":{s}}}"#),
        None => r#"{"type":"reset"}"#.to_string(),
    };
    send_line(&mut stream, reset)?;
    line.clear();
    reader.read_line(&mut line)?;
    let obs: Value = serde_json::from_str(&line)?;
    anyhow::ensure!(obs["type"] == "obs", "expected obs, got {line}");

    let all_zero: BTreeMap<String, usize> = agents.iter().map(|a| (a.to_string(), 0)).collect();
    let act = serde_json::to_string(&serde_json::json!({"type": "act", "actions": all_zero}))?;

    loop {
        send_line(&mut stream, act.clone())?;
        line.clear();
        reader.read_line(&mut line)?;
        let reward: Value = serde_json::from_str(&line)?;
        anyhow::ensure!(reward["type"] == "reward", "expected reward, got {line}");
        line.clear();
        reader.read_line(&mut line)?;
        let next: Value = serde_json::from_str(&line)?;
        match next["type"].as_str() {
            Some("obs") => continue,
            Some("done") => {
                return Ok(serde_json::from_value(next["metrics"].clone())?);
            }
            _ => anyhow::bail!("unexpected message: {line}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use edgesim_core::default_config;

    fn tiny_config() -> SimConfig {
        let mut file = ConfigFile::default();
        file.horizon = Some(5);
        file.topology.nodes_per_tier = Some(vec![1, 1]);
        file.build(None).unwrap()
    }

    #[test]
    fn hello_lists_agents_and_width() {
        let config = default_config();
        let mut env = None;
        let out = handle_line(r#"{"type":"hello"}"#, &config, &mut env, "s1");
        match &out[0] {
            Response::Hello {
                agents, obs_width, ..
            } => {
                assert_eq!(agents.len(), 30);
                assert_eq!(*obs_width, (1 + config.max_neighbors) * 9 + 1);
            }
            other => panic!("expected hello, got {other:?}"),
        }
    }

    #[test]
    fn unknown_type_keeps_session_alive() {
        let config = tiny_config();
        let mut env = None;
        let out = handle_line(r#"{"type":"warp"}"#, &config, &mut env, "s1");
        assert!(
            matches!(&out[0], Response::Error { reason, .. } if reason.contains("unknown message type"))
        );
        // Session still usable.
        let out = handle_line(r#"{"type":"reset"}"#, &config, &mut env, "s1");
        assert!(matches!(&out[0], Response::Obs { .. }));
    }

    #[test]
    fn malformed_line_reports_reason() {
        let config = tiny_config();
        let mut env = None;
        let out = handle_line("{nope", &config, &mut env, "s1");
        assert!(matches!(&out[0], Response::Error { reason, .. } if reason.contains("malformed")));
    }

    #[test]
    fn act_before_reset_is_an_error() {
        let config = tiny_config();
        let mut env = None;
        let out = handle_line(
            r#"{"type":"act","actions":{"0":0}}"#,
            &config,
            &mut env,
            "s1",
        );
        assert!(
            matches!(&out[0], Response::Error { reason, .. } if reason.contains("no active episode"))
        );
    }

    #[test]
    fn incomplete_joint_action_names_the_agent() {
        let config = tiny_config();
        let mut env = None;
        handle_line(r#"{"type":"reset"}"#, &config, &mut env, "s1");
        let out = handle_line(r#"{"type":"act","actions":{}}"#, &config, &mut env, "s1");
        match &out[0] {
            Response::Error { reason, .. } => assert!(reason.contains("incomplete joint action")),
            other => panic!("expected error, got {other:?}"),
        }
        // The episode survives the bad action.
        let out = handle_line(
            r#"{"type":"act","actions":{"0":0,"1":0}}"#,
            &config,
            &mut env,
            "s1",
        );
        assert!(matches!(&out[0], Response::Reward { .. }));
    }

    #[test]
    fn act_sequence_finishes_with_done() {
        let config = tiny_config();
        let mut env = None;
        handle_line(r#"{"type":"reset","seed":4}"#, &config, &mut env, "s1");
        for step in 0..5 {
            let out = handle_line(
                r#"{"type":"act","actions":{"0":0,"1":0}}"#,
                &config,
                &mut env,
                "s1",
            );
            assert!(matches!(&out[0], Response::Reward { .. }));
            if step < 4 {
                assert!(matches!(&out[1], Response::Obs { .. }));
            } else {
                assert!(matches!(&out[1], Response::Done { .. }));
            }
        }
    }

    #[test]
    fn wire_metrics_roundtrip() {
        let mut m = EpisodeMetrics::default();
        m.generated = 5;
        m.completed = 3;
        m.response_times = vec![2, 7, 9];
        m.overloads_by_node.insert(2, 4);
        m.reward_by_agent.insert(0, -1.5);
        m.resident_at_end = 2;
        let wire = WireMetrics::from_metrics(&m);
        let json = serde_json::to_string(&wire).unwrap();
        let back: WireMetrics = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_metrics(), m);
    }
}
