//! `mdeo` command-line front end.
//!
//! Every subcommand that writes a directory stages its files next to the
//! destination and moves them into place only after success.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mdeo::alignment::self_alignment_accuracy;
use mdeo::community::{detect_greedy_modularity, modularity, GreedyModularity, Partition};
use mdeo::config::{LoadedNetwork, RunConfig};
use mdeo::embedding::{train_gae, GaeHyper};
use mdeo::evo::baselines::{dice_baseline, ram_baseline};
use mdeo::evo::Genome;
use mdeo::graph::load_edge_list;
use mdeo::io::{
    create_file, read_solution, write_embeddings_csv, write_partition_csv, write_solution, Solution,
};
use mdeo::metrics::{ari, nmi, structural_report, StructuralReport};
use mdeo::orchestrator::{
    prepare_transfer, run_mdeo, run_sdeo, write_generation_csv, write_rho_csv, write_transfer_csv,
    DomainState,
};
use mdeo::rng;
use mdeo::similarity::{init_similarity_and_assisted, SimilarityProfile};
use mdeo::synth::{planted_partition, write_edge_list};

const LOG_ENV: &str = "MDEO_LOG";

#[derive(Parser)]
#[command(
    name = "mdeo",
    version,
    about = "Multi-domain evolutionary optimization on networks"
)]
struct Cli {
    /// Upper bound on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut c = RunConfig::load(&self.config)
            .with_context(|| format!("reading {}", self.config.display()))?;
        if let Some(seed) = self.seed {
            c.seed = seed;
        }
        if let Some(out) = &self.output {
            c.output = out.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the pairwise network similarity matrix and assisted sets.
    Similarity(ConfigArgs),
    /// Train one autoencoder per network and dump its embeddings.
    Embed(ConfigArgs),
    /// Train alignments for assisted pairs and dump node maps.
    Align(ConfigArgs),
    /// Run the optimization and write curves, logs and solutions.
    Optimize {
        #[command(flatten)]
        config: ConfigArgs,
        /// Run each network independently, with no transfer.
        #[arg(long)]
        no_transfer: bool,
    },
    /// Score an edit script against a network.
    Evaluate {
        /// Edge list of the network.
        #[arg(long)]
        network: PathBuf,
        /// Edit script to apply.
        #[arg(long)]
        solution: PathBuf,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Produce a baseline edit script.
    Baseline {
        #[arg(long)]
        network: PathBuf,
        #[arg(long, value_enum)]
        kind: BaselineKind,
        #[arg(long)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a planted-partition network.
    Gen {
        /// Community sizes, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long)]
        p_in: f64,
        #[arg(long)]
        p_out: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the planted communities as CSV.
        #[arg(long)]
        partition: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineKind {
    Ram,
    Dice,
}

/// A directory that replaces `dest` on [`Staging::commit`] and is removed
/// if dropped before that.
struct Staging {
    dir: PathBuf,
    dest: PathBuf,
    committed: bool,
}

impl Staging {
    fn new(dest: &Path) -> Result<Self> {
        let name = dest
            .file_name()
            .context("output path has no final component")?
            .to_string_lossy();
        let parent = dest
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        let dir = parent.join(format!(".{name}.partial-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Staging {
            dir,
            dest: dest.to_path_buf(),
            committed: false,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn commit(mut self) -> Result<()> {
        if self.dest.exists() {
            fs::remove_dir_all(&self.dest)
                .with_context(|| format!("replacing {}", self.dest.display()))?;
        }
        fs::rename(&self.dir, &self.dest)
            .with_context(|| format!("moving results to {}", self.dest.display()))?;
        self.committed = true;
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

/// Writes one file through a sibling temporary that is renamed on success.
fn write_atomically(dest: &Path, f: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let tmp = dest.with_extension(format!("partial-{}", std::process::id()));
    if let Some(parent) = dest.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    match f(&tmp) {
        Ok(()) => fs::rename(&tmp, dest).with_context(|| format!("writing {}", dest.display())),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

fn names_of(nets: &[LoadedNetwork]) -> Vec<String> {
    nets.iter().map(|n| n.name.clone()).collect()
}

fn cmd_similarity(args: &ConfigArgs) -> Result<()> {
    let config = args.load()?;
    let nets = config.load_networks()?;
    let profiles: Vec<SimilarityProfile> = nets
        .iter()
        .map(|n| SimilarityProfile::detect(&n.loaded.graph))
        .collect::<mdeo::Result<_>>()?;
    let s = init_similarity_and_assisted(&profiles, config.transfer.assisted_override)?;
    let names = names_of(&nets);
    let stage = Staging::new(&config.output)?;
    s.write_csv(&names, create_file(stage.path("similarity.csv"))?, false)?;
    s.write_csv(
        &names,
        create_file(stage.path("similarity_normalized.csv"))?,
        true,
    )?;
    let mut w = csv_writer(&stage.path("assisted.csv"))?;
    w.write_record(["network", "assisted"])?;
    for (i, row) in s.assisted.iter().enumerate() {
        let joined: Vec<&str> = row.iter().map(|&j| names[j].as_str()).collect();
        w.write_record([names[i].as_str(), &joined.join(";")])?;
    }
    w.flush()?;
    drop(w);
    stage.commit()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

fn cmd_embed(args: &ConfigArgs) -> Result<()> {
    let config = args.load()?;
    let nets = config.load_networks()?;
    let stage = Staging::new(&config.output)?;
    for (i, n) in nets.iter().enumerate() {
        let g = &n.loaded.graph;
        let p = match n.problem.base_partition() {
            Some(p) => p.clone(),
            None => detect_greedy_modularity(g)?,
        };
        let hyper = GaeHyper {
            seed: rng::derive_seed(config.seed, "gae", &[i as u64]),
            ..config.learn.gae.clone()
        };
        let t = train_gae(g, &p, &hyper)?;
        log::info!(
            "{}: final reconstruction loss {:.5}",
            n.name,
            t.losses.last().copied().unwrap_or(f64::NAN)
        );
        write_embeddings_csv(
            &t.embeddings,
            &n.loaded.labels,
            create_file(stage.path(&format!("embeddings_{}.csv", n.name)))?,
        )?;
        write_partition_csv(
            &p,
            &n.loaded.labels,
            create_file(stage.path(&format!("communities_{}.csv", n.name)))?,
        )?;
        fs::write(
            stage.path(&format!("gae_{}.txt", n.name)),
            t.params.to_text(),
        )?;
    }
    stage.commit()
}

fn states_of(nets: Vec<LoadedNetwork>, seed: u64) -> Vec<DomainState> {
    nets.into_iter()
        .enumerate()
        .map(|(i, n)| DomainState::new(n.name, n.problem, i, seed))
        .collect()
}

fn cmd_align(args: &ConfigArgs) -> Result<()> {
    let config = args.load()?;
    let nets = config.load_networks()?;
    if nets.len() < 2 {
        bail!("alignment needs at least two networks, got {}", nets.len());
    }
    let labels: Vec<Vec<String>> = nets.iter().map(|n| n.loaded.labels.clone()).collect();
    let graphs: Vec<_> = nets.iter().map(|n| n.loaded.graph.clone()).collect();
    let names = names_of(&nets);
    let mdeo_config = config.mdeo_config();
    let mut states = states_of(nets, config.seed);
    let ctx = prepare_transfer(&mut states, &mdeo_config)?;

    let stage = Staging::new(&config.output)?;
    let mut keys: Vec<_> = ctx.alignments.keys().copied().collect();
    keys.sort_unstable();
    for (a, b) in keys {
        let pair = &ctx.alignments[&(a, b)];
        for (src, dst, m) in [
            (a, b, &pair.forward_mapping),
            (b, a, &pair.backward_mapping),
        ] {
            let mut w =
                csv_writer(&stage.path(&format!("map_{}_to_{}.csv", names[src], names[dst])))?;
            w.write_record(["source_id", "target_id"])?;
            for (u, &v) in m.map.iter().enumerate() {
                w.write_record([&labels[src][u], &labels[dst][v]])?;
            }
            w.flush()?;
        }
        fs::write(
            stage.path(&format!("affine_{}_to_{}.txt", names[a], names[b])),
            pair.trained.forward.to_text(),
        )?;
        fs::write(
            stage.path(&format!("affine_{}_to_{}.txt", names[b], names[a])),
            pair.trained.backward.to_text(),
        )?;
    }
    let mut w = csv_writer(&stage.path("self_alignment.csv"))?;
    w.write_record(["network", "top_decile_recovery"])?;
    for (i, g) in graphs.iter().enumerate() {
        let gae = GaeHyper {
            seed: rng::derive_seed(config.seed, "gae", &[i as u64]),
            ..config.learn.gae.clone()
        };
        let acc = self_alignment_accuracy(
            g,
            &gae,
            &config.learn.alignment,
            rng::derive_seed(config.seed, "self-align", &[i as u64]),
        )?;
        log::info!(
            "{}: self-alignment recovers {:.3} of the top decile",
            names[i],
            acc
        );
        w.write_record([names[i].clone(), acc.to_string()])?;
    }
    w.flush()?;
    drop(w);
    stage.commit()
}

fn cmd_optimize(args: &ConfigArgs, no_transfer: bool) -> Result<()> {
    let config = args.load()?;
    let nets = config.load_networks()?;
    let labels: Vec<Vec<String>> = nets.iter().map(|n| n.loaded.labels.clone()).collect();
    let graphs: Vec<_> = nets.iter().map(|n| n.loaded.graph.clone()).collect();
    let problems: Vec<_> = nets.into_iter().map(|n| (n.name, n.problem)).collect();
    let bases: Vec<Option<Partition>> = problems
        .iter()
        .map(|(_, p)| p.base_partition().cloned())
        .collect();
    let mdeo_config = config.mdeo_config();
    let started = std::time::Instant::now();
    let result = if no_transfer {
        run_sdeo(problems, &mdeo_config)?
    } else {
        run_mdeo(problems, &mdeo_config)?
    };
    log::info!(
        "optimization finished in {:.1}s",
        started.elapsed().as_secs_f64()
    );
    let names: Vec<String> = result.networks.iter().map(|n| n.name.clone()).collect();

    let stage = Staging::new(&config.output)?;
    write_generation_csv(&result.records, create_file(stage.path("generations.csv"))?)?;
    write_rho_csv(&result.records, create_file(stage.path("rho.csv"))?)?;
    write_transfer_csv(
        &result.transfers,
        &names,
        create_file(stage.path("transfers.csv"))?,
    )?;
    if let Some(s) = &result.similarity {
        s.write_csv(&names, create_file(stage.path("similarity.csv"))?, true)?;
    }
    let solutions = stage.path("solutions");
    fs::create_dir(&solutions)?;
    let mut summary = csv_writer(&stage.path("summary.csv"))?;
    summary.write_record([
        "network",
        "best_fitness",
        "nmi",
        "ari",
        "modularity_before",
        "modularity_after",
    ])?;
    let mut reports = Vec::new();
    for (i, n) in result.networks.iter().enumerate() {
        write_solution(
            &n.best.genome,
            &labels[i],
            create_file(solutions.join(format!("{}.txt", n.name)))?,
        )?;
        let mut row = vec![n.name.clone(), n.best_fitness.to_string()];
        match (&n.best.genome, &bases[i]) {
            (Genome::Deception { .. }, Some(base)) => {
                let attacked = graphs[i].apply_edits(&n.best.genome.edit_set())?;
                let after = detect_greedy_modularity(&attacked)?;
                row.push(nmi(base, &after)?.to_string());
                row.push(ari(base, &after)?.to_string());
                row.push(modularity(&graphs[i], base)?.to_string());
                row.push(modularity(&attacked, &after)?.to_string());
                reports.push((
                    n.name.clone(),
                    structural_report(&graphs[i], &n.best.genome.edit_set(), &GreedyModularity)?,
                ));
            }
            _ => row.extend(std::iter::repeat_n(String::new(), 4)),
        }
        summary.write_record(&row)?;
    }
    summary.flush()?;
    drop(summary);
    if !reports.is_empty() {
        StructuralReport::write_csv(&reports, create_file(stage.path("structure.csv"))?)?;
    }
    stage.commit()
}

fn cmd_evaluate(network: &Path, solution: &Path, out: Option<&Path>) -> Result<()> {
    let loaded = load_edge_list(network)?;
    let g = &loaded.graph;
    let edits = match read_solution(solution, &loaded.labels)? {
        Solution::Edits(e) => e,
        Solution::Seeds(_) => bail!(
            "{} is a seed set; evaluate scores edge edits",
            solution.display()
        ),
    };
    let base = detect_greedy_modularity(g)?;
    let attacked = g.apply_edits(&edits)?;
    let after = detect_greedy_modularity(&attacked)?;
    let report = structural_report(g, &edits, &GreedyModularity)?;
    let write = |w: &mut dyn std::io::Write| -> Result<()> {
        let mut c = csv::Writer::from_writer(w);
        let mut header = vec!["nmi".to_string(), "ari".to_string()];
        header.extend(
            StructuralReport::CSV_HEADER
                .iter()
                .skip(1)
                .map(|s| s.to_string()),
        );
        c.write_record(&header)?;
        let mut row = vec![
            nmi(&base, &after)?.to_string(),
            ari(&base, &after)?.to_string(),
        ];
        row.extend(report.csv_row("").into_iter().skip(1));
        c.write_record(&row)?;
        c.flush()?;
        Ok(())
    };
    match out {
        Some(path) => write_atomically(path, |tmp| write(&mut fs::File::create(tmp)?)),
        None => write(&mut std::io::stdout().lock()),
    }
}

fn cmd_baseline(
    network: &Path,
    kind: BaselineKind,
    budget: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let loaded = load_edge_list(network)?;
    let g = &loaded.graph;
    let mut r = rng::substream(seed, "baseline", &[]);
    let edits = match kind {
        BaselineKind::Ram => ram_baseline(g, budget, &mut r)?,
        BaselineKind::Dice => dice_baseline(g, &detect_greedy_modularity(g)?, budget, &mut r)?,
    };
    let genome = Genome::deception(edits.additions, edits.deletions);
    write_atomically(out, |tmp| {
        Ok(write_solution(&genome, &loaded.labels, create_file(tmp)?)?)
    })
}

fn cmd_gen(
    sizes: &[usize],
    p_in: f64,
    p_out: f64,
    seed: u64,
    out: &Path,
    partition: Option<&Path>,
) -> Result<()> {
    let (g, p) = planted_partition(sizes, p_in, p_out, seed)?;
    write_atomically(out, |tmp| Ok(write_edge_list(&g, create_file(tmp)?)?))?;
    if let Some(path) = partition {
        let labels: Vec<String> = (0..g.node_count()).map(|v| v.to_string()).collect();
        write_atomically(path, |tmp| {
            Ok(write_partition_csv(&p, &labels, create_file(tmp)?)?)
        })?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()?;
    }
    match &cli.command {
        Command::Similarity(a) => cmd_similarity(a),
        Command::Embed(a) => cmd_embed(a),
        Command::Align(a) => cmd_align(a),
        Command::Optimize {
            config,
            no_transfer,
        } => cmd_optimize(config, *no_transfer),
        Command::Evaluate {
            network,
            solution,
            out,
        } => cmd_evaluate(network, solution, out.as_deref()),
        Command::Baseline {
            network,
            kind,
            budget,
            seed,
            out,
        } => cmd_baseline(network, *kind, *budget, *seed, out),
        Command::Gen {
            sizes,
            p_in,
            p_out,
            seed,
            out,
            partition,
        } => cmd_gen(sizes, *p_in, *p_out, *seed, out, partition.as_deref()),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
