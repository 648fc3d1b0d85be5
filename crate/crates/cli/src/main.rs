//! `edgesim` — run, sweep, train, and serve task-offloading simulations.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use edgesim_cli::{
    curve_csv, evaluate, load_config_file, run_cell, serve, sweep_csv, synth_trace, train_q,
    SweepAxis, SweepSpec,
};
use edgesim_core::{
    emit_csv, summarize, validate_config, ClusterPlan, CsvRow, NodeId, PolicyKind, QLearnerParams,
    QTable, SimConfig, TopologyFile,
};
use std::collections::BTreeMap;
use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "edgesim",
    version,
    about = "Edge-network task-offloading simulator"
)]
struct Cli {
    /// Config file; defaults come from EDGESIM_CONFIG, then built-ins.
    #[arg(long, global = true, env = "EDGESIM_CONFIG")]
    config: Option<PathBuf>,
    /// Override a config key by dotted name, e.g. --set lambda=0.3
    /// or --set reward.chi_o=99. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the config against every invariant and list violations.
    Validate,
    /// Run episodes with one policy and print a summary.
    Run {
        #[arg(long, default_value = "local")]
        policy: String,
        #[arg(long, default_value_t = 1)]
        episodes: usize,
        /// Base seed; episode i uses seed + i. Defaults to the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Q-table file prefix for --policy qtable (expects
        /// <prefix>agent<id>.qtab files from `train`).
        #[arg(long)]
        tables: Option<PathBuf>,
        /// Write the summary as a CSV row here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Sweep an axis across policies and emit one CSV row per cell.
    Sweep {
        #[arg(long, default_value = "lambda")]
        axis: String,
        /// Comma-separated axis values, e.g. 0.05,0.1,0.2.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Comma-separated policies, e.g. local,random,least-queue.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "local,random,least-queue"
        )]
        policies: Vec<String>,
        #[arg(long, default_value_t = 30)]
        episodes: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train tabular Q-learners and export tables plus the learning curve.
    Train {
        #[arg(long, default_value_t = 300)]
        episodes: usize,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        eps_start: f64,
        #[arg(long, default_value_t = 0.05)]
        eps_end: f64,
        #[arg(long, default_value_t = 0.985)]
        eps_decay: f64,
        #[arg(long, default_value_t = 4)]
        buckets: u32,
        #[arg(long)]
        seed: Option<u64>,
        /// Evaluation episodes after training (epsilon = eps_end).
        #[arg(long, default_value_t = 100)]
        eval_episodes: usize,
        /// Prefix for exported tables (<prefix>agent<id>.qtab).
        #[arg(long)]
        table_out: Option<PathBuf>,
        /// Learning-curve CSV path.
        #[arg(long)]
        curve_out: Option<PathBuf>,
    },
    /// Serve the newline-delimited JSON bridge for external agents.
    Serve {
        #[arg(long, default_value_t = 5555)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Write a cluster-plan topology file.
    GenTopology {
        #[arg(long, default_value_t = 1)]
        clusters: usize,
        #[arg(long, default_value_t = 4)]
        pairs: usize,
        #[arg(long, default_value_t = 3)]
        base_nodes: usize,
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        server: bool,
        #[arg(long, required = true)]
        out: PathBuf,
    },
    /// Write a synthetic trace fixture.
    GenTraceFixture {
        #[arg(long, default_value_t = 50)]
        jobs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, required = true)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    // Die quietly when the reading end of a pipe closes (e.g. | head).
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let (file, base_dir) = load_config_file(cli.config.as_deref(), &cli.overrides)?;

    match cli.command {
        Command::Validate => {
            let config = file.build(base_dir.as_deref())?;
            let violations = validate_config(&config);
            if violations.is_empty() {
                println!(
                    "OK: {} nodes, {} agents",
                    config.topology.len(),
                    config.controllers().len()
                );
                Ok(())
            } else {
                for v in &violations {
                    eprintln!("violation: {v}");
                }
                bail!("{} violation(s)", violations.len());
            }
        }
        Command::Run {
            policy,
            episodes,
            seed,
            tables,
            csv,
        } => {
            let config = file.build(base_dir.as_deref())?;
            let kind = PolicyKind::parse(&policy)?;
            let base_seed = seed.unwrap_or(config.seed);
            let batch = match &kind {
                PolicyKind::TabularQ(params) => {
                    let prefix = tables
                        .as_deref()
                        .context("--policy qtable needs --tables <prefix> from a prior train")?;
                    let loaded = load_tables(prefix, &config)?;
                    evaluate(
                        &config,
                        &loaded,
                        episodes,
                        params,
                        params.epsilon_end,
                        base_seed,
                    )?
                }
                _ => run_cell(&config, &kind, episodes, base_seed)?,
            };
            let summary = summarize(&batch)?;
            println!("policy: {}", kind.name());
            println!("episodes: {}", summary.episodes);
            println!(
                "generated (mean): {}",
                edgesim_core::sig6(summary.generated_mean)
            );
            println!(
                "completed (mean): {}",
                edgesim_core::sig6(summary.completed_mean)
            );
            println!(
                "overloads (mean +- std): {} +- {}",
                edgesim_core::sig6(summary.overloads_mean),
                edgesim_core::sig6(summary.overloads_std)
            );
            match summary.resp_mean {
                Some(m) => println!(
                    "response time (mean +- std): {} +- {}",
                    edgesim_core::sig6(m),
                    edgesim_core::sig6(summary.resp_std.unwrap_or(0.0))
                ),
                None => println!("response time: n/a (no completions)"),
            }
            println!(
                "dropped (mean +- std): {} +- {}",
                edgesim_core::sig6(summary.dropped_mean),
                edgesim_core::sig6(summary.dropped_std)
            );
            println!("drop fraction: {}", edgesim_core::sig6(summary.drop_pct));
            println!(
                "mean agent reward: {}",
                edgesim_core::sig6(summary.reward_mean)
            );
            if let Some(path) = csv {
                let row = CsvRow {
                    scenario: "run".to_string(),
                    policy: kind.name().to_string(),
                    lambda: config.lambda,
                    clusters: 0,
                    seed: base_seed,
                    summary,
                };
                std::fs::write(&path, emit_csv(&[row]))
                    .with_context(|| format!("writing {}", path.display()))?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Sweep {
            axis,
            values,
            policies,
            episodes,
            seed,
            out,
        } => {
            let axis = SweepAxis::parse(&axis)?;
            let policies = policies
                .iter()
                .map(|p| PolicyKind::parse(p).map_err(anyhow::Error::from))
                .collect::<Result<Vec<_>>>()?;
            let base_seed = seed.or(file.seed).unwrap_or(0);
            let spec = SweepSpec {
                axis,
                values,
                policies,
                episodes,
                base: file,
                base_dir,
                base_seed,
            };
            let csv = sweep_csv(&spec)?;
            match out {
                Some(path) => {
                    std::fs::write(&path, csv)
                        .with_context(|| format!("writing {}", path.display()))?;
                    println!("wrote {}", path.display());
                }
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Train {
            episodes,
            alpha,
            gamma,
            eps_start,
            eps_end,
            eps_decay,
            buckets,
            seed,
            eval_episodes,
            table_out,
            curve_out,
        } => {
            let config = file.build(base_dir.as_deref())?;
            let params = QLearnerParams {
                alpha,
                gamma,
                epsilon_start: eps_start,
                epsilon_end: eps_end,
                epsilon_decay: eps_decay,
                buckets,
            };
            let base_seed = seed.unwrap_or(config.seed);
            let outcome = train_q(&config, episodes, &params, base_seed)?;
            let last = outcome.curve.last().expect("at least one episode");
            println!(
                "trained {} episodes; final epsilon {}, final mean reward {}",
                episodes,
                edgesim_core::sig6(last.epsilon),
                edgesim_core::sig6(last.mean_reward)
            );
            if eval_episodes > 0 {
                let batch = evaluate(
                    &config,
                    &outcome.tables,
                    eval_episodes,
                    &params,
                    params.epsilon_end,
                    base_seed + episodes as u64,
                )?;
                let summary = summarize(&batch)?;
                println!(
                    "evaluation over {} episodes: mean reward {}, drop fraction {}",
                    eval_episodes,
                    edgesim_core::sig6(summary.reward_mean),
                    edgesim_core::sig6(summary.drop_pct)
                );
            }
            if let Some(prefix) = table_out {
                write_tables(&prefix, &outcome.tables)?;
                println!(
                    "wrote {} table file(s) at {}agent<id>.qtab",
                    outcome.tables.len(),
                    prefix.display()
                );
            }
            if let Some(path) = curve_out {
                std::fs::write(&path, curve_csv(&outcome.curve))
                    .with_context(|| format!("writing {}", path.display()))?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Serve { port, host } => {
            let config = file.build(base_dir.as_deref())?;
            let listener = TcpListener::bind((host.as_str(), port))
                .with_context(|| format!("binding {host}:{port}"))?;
            println!(
                "bridge listening on {host}:{port} ({} agents)",
                config.controllers().len()
            );
            serve(listener, config)?;
            Ok(())
        }
        Command::GenTopology {
            clusters,
            pairs,
            base_nodes,
            server,
            out,
        } => {
            let plan = ClusterPlan {
                n_clusters: clusters,
                sbc_pairs_per_cluster: pairs,
                base_station_nodes: base_nodes,
                shared_server: server,
                ..ClusterPlan::default()
            };
            let topo = edgesim_core::generate_cluster_topology(&plan);
            let text = toml::to_string(&TopologyFile::from_topology(&topo))?;
            std::fs::write(&out, text).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {} ({} nodes)", out.display(), topo.len());
            Ok(())
        }
        Command::GenTraceFixture { jobs, seed, out } => {
            let trace = synth_trace(jobs, seed);
            let text = serde_json::to_string_pretty(&trace)?;
            std::fs::write(&out, text).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {} ({} jobs)", out.display(), jobs);
            Ok(())
        }
    }
}

fn table_path(prefix: &Path, agent: NodeId) -> PathBuf {
    let mut name = prefix
        .file_name()
        .map(|s| s.to_os_string())
        .unwrap_or_default();
    name.push(format!("agent{agent}.qtab"));
    prefix.with_file_name(name)
}

fn write_tables(prefix: &Path, tables: &BTreeMap<NodeId, QTable>) -> Result<()> {
    for (&agent, table) in tables {
        let path = table_path(prefix, agent);
        let mut out = Vec::new();
        table.export(&mut out)?;
        let mut f =
            std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        f.write_all(&out)?;
    }
    Ok(())
}

fn load_tables(prefix: &Path, config: &SimConfig) -> Result<BTreeMap<NodeId, QTable>> {
    let mut tables = BTreeMap::new();
    for agent in config.controllers() {
        let path = table_path(prefix, agent);
        let file =
            std::fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
        tables.insert(agent, QTable::import(std::io::BufReader::new(file))?);
    }
    Ok(tables)
}
