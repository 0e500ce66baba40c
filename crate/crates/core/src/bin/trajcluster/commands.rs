use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde_json::json;
use trajcluster::baseline::{adjusted_rand_index_labels, hac_average_linkage, size_histogram};
use trajcluster::community::{hierarchical_cluster, NullModelConfig, OptimizerConfig, Partition};
use trajcluster::datagen::{self, GenerationSpec};
use trajcluster::format::{read_labels, round12, sig12, write_labels};
use trajcluster::{
    build_segment_graph, build_trajectory_graph, load_network, load_trajectories, Corpus,
    SegmentMode, SimilarityGraph,
};

use crate::manifest::RunManifest;
use crate::{BaselineArgs, ClusterArgs, Entity, EvalArgs, GenerateArgs, GraphFormat};

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write(dir: &Path, name: &str, text: &str, outputs: &mut Vec<String>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    outputs.push(name.to_owned());
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn load_corpus(network: &Path, trajectories: &Path, manifest: &mut RunManifest) -> Result<Corpus> {
    let net_bytes = read(network)?;
    let net = load_network(net_bytes.as_slice())
        .with_context(|| format!("loading network {}", network.display()))?;
    for w in net.warnings() {
        eprintln!("warning: {}: {w}", network.display());
    }
    let traj_bytes = read(trajectories)?;
    let corpus = load_trajectories(traj_bytes.as_slice(), Arc::new(net))
        .with_context(|| format!("loading trajectories {}", trajectories.display()))?;
    manifest.input(network, &net_bytes);
    manifest.input(trajectories, &traj_bytes);
    Ok(corpus)
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let groups_bytes = read(&args.groups)?;
    let groups = datagen::parse_groups(groups_bytes.as_slice())
        .with_context(|| format!("parsing {}", args.groups.display()))?;
    let spec = GenerationSpec {
        width: args.grid.0,
        height: args.grid.1,
        segment_length: args.segment_length,
        jitter: args.jitter,
        groups,
        seed: args.seed,
    };
    spec.validate()?;
    let network = Arc::new(datagen::generate_network(&spec)?);
    let (corpus, truth) = datagen::generate_corpus(&spec, network)?;

    create_dir(&args.out)?;
    let mut manifest = RunManifest::new("generate", serde_json::to_value(&spec)?);
    manifest.input(&args.groups, &groups_bytes);
    let mut outputs = Vec::new();
    write(&args.out, datagen::NETWORK_FILE, &corpus.network().to_csv(), &mut outputs)?;
    write(&args.out, datagen::TRAJECTORY_FILE, &corpus.to_csv(), &mut outputs)?;
    write(&args.out, datagen::TRUTH_FILE, &datagen::truth_csv(&truth), &mut outputs)?;
    manifest.outputs = outputs;
    manifest.write(&args.out)?;
    println!(
        "generated {} segments, {} trajectories in {} groups -> {}",
        corpus.network().segment_count(),
        corpus.len(),
        spec.groups.len(),
        args.out.display()
    );
    Ok(())
}

fn null_config(args: &ClusterArgs) -> Result<NullModelConfig> {
    let config = NullModelConfig {
        samples: args.null_samples,
        quantile: args.significance_quantile,
        seed: args.seed,
        optimizer: OptimizerConfig {
            restarts: args.restarts,
        },
        ..NullModelConfig::default()
    };
    config.validate()?;
    Ok(config)
}

fn export_graph(graph: &SimilarityGraph, args: &ClusterArgs, outputs: &mut Vec<String>) -> Result<()> {
    match args.graph_format {
        GraphFormat::Csv => write(&args.out, "graph_edges.csv", &graph.to_edge_csv(), outputs),
        GraphFormat::Dot => write(&args.out, "graph.dot", &graph.to_dot(), outputs),
    }
}

pub fn cluster(args: &ClusterArgs, mode: Option<SegmentMode>) -> Result<()> {
    let config = null_config(args)?;
    let command = if mode.is_some() {
        "cluster-segments"
    } else {
        "cluster-trajectories"
    };
    let mut manifest = RunManifest::new(
        command,
        json!({
            "seed": args.seed,
            "null_samples": args.null_samples,
            "significance_quantile": args.significance_quantile,
            "swaps_per_edge": config.swaps_per_edge,
            "restarts": args.restarts,
            "depth": args.depth,
            "export_graph": args.export_graph,
            "graph_format": args.graph_format,
            "mode": mode,
        }),
    );
    let corpus = load_corpus(&args.network, &args.trajectories, &mut manifest)?;
    if corpus.is_empty() {
        bail!("{} contains no trajectories", args.trajectories.display());
    }
    let graph = match mode {
        None => build_trajectory_graph(&corpus),
        Some(m) => build_segment_graph(&corpus, m),
    };
    if graph.edge_count() == 0 {
        eprintln!("warning: similarity graph has no edges; hierarchy is a single leaf");
    }
    let hierarchy = hierarchical_cluster(&graph, &config)?;

    create_dir(&args.out)?;
    let mut outputs = Vec::new();
    write(&args.out, "hierarchy.json", &hierarchy.to_json(), &mut outputs)?;
    for &d in &args.depth {
        write(&args.out, &format!("cut_depth_{d}.csv"), &hierarchy.cut_csv(d), &mut outputs)?;
    }
    if args.export_graph {
        export_graph(&graph, args, &mut outputs)?;
    }
    manifest.outputs = outputs;
    manifest.write(&args.out)?;
    println!(
        "{} nodes, {} edges; hierarchy: {} levels, {} leaves, {} top-level clusters",
        graph.node_count(),
        graph.edge_count(),
        hierarchy.levels(),
        hierarchy.leaves().count(),
        hierarchy.cut_at_depth(1).cluster_count()
    );
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let predicted_bytes = read(&args.predicted)?;
    let truth_bytes = read(&args.truth)?;
    let predicted = read_labels(predicted_bytes.as_slice())
        .with_context(|| format!("parsing {}", args.predicted.display()))?;
    let truth = read_labels(truth_bytes.as_slice())
        .with_context(|| format!("parsing {}", args.truth.display()))?;
    let ari = adjusted_rand_index_labels(&predicted, &truth)?;
    let labels: Vec<&String> = predicted.values().collect();
    let histogram = size_histogram(&Partition::from_labels(&labels));

    let mut text = format!(
        "entities: {}\nari: {}\ncluster size histogram (size: clusters):\n",
        predicted.len(),
        sig12(ari)
    );
    for (size, count) in &histogram {
        text += &format!("  {size}: {count}\n");
    }
    if let Some(out) = &args.out {
        create_dir(out)?;
        let mut manifest = RunManifest::new("eval", json!({}));
        manifest.input(&args.predicted, &predicted_bytes);
        manifest.input(&args.truth, &truth_bytes);
        let report = json!({
            "entities": predicted.len(),
            "ari": round12(ari),
            "size_histogram": histogram
                .iter()
                .map(|(s, c)| json!({"size": s, "clusters": c}))
                .collect::<Vec<_>>(),
        });
        let mut outputs = Vec::new();
        write(out, "eval.json", &(serde_json::to_string_pretty(&report)? + "\n"), &mut outputs)?;
        manifest.outputs = outputs;
        manifest.write(out)?;
    }
    print_report(&text)
}

/// Writes to stdout, treating a closed pipe (say, `| head`) as success.
fn print_report(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

pub fn baseline(args: &BaselineArgs) -> Result<()> {
    let mut manifest = RunManifest::new(
        "baseline",
        json!({ "k": args.k, "entity": args.entity, "mode": args.mode }),
    );
    let corpus = load_corpus(&args.network, &args.trajectories, &mut manifest)?;
    let graph = match args.entity {
        Entity::Trajectories => build_trajectory_graph(&corpus),
        Entity::Segments => build_segment_graph(&corpus, args.mode),
    };
    if args.k > graph.node_count() {
        bail!(
            "--k {} exceeds the number of entities ({})",
            args.k,
            graph.node_count()
        );
    }
    let (dendrogram, partition) = hac_average_linkage(&graph, args.k)?;

    create_dir(&args.out)?;
    let mut outputs = Vec::new();
    write(&args.out, "dendrogram.csv", &dendrogram.to_csv(), &mut outputs)?;
    let rows = graph
        .ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), partition.label(i).to_string()));
    write(
        &args.out,
        "partition.csv",
        &write_labels("entity_id,cluster_label", rows),
        &mut outputs,
    )?;
    manifest.outputs = outputs;
    manifest.write(&args.out)?;
    println!(
        "{} entities, {} merges, {} clusters",
        graph.node_count(),
        dendrogram.merges.len(),
        partition.cluster_count()
    );
    Ok(())
}
