//! File formats shared by the pipeline stages.
//!
//! * embeddings: TSV, header `id\tdim=<D>`, then `<id>\t<v1>\t...\t<vD>`
//! * labels: CSV `id_a,id_b,label` with label `dup` or `distinct`
//! * linksets and candidate pairs: CSV `id_a,id_b`
//! * scores: CSV `id_a,id_b,p`
//! * truth clusters: one cluster per line, identifiers separated by spaces
//! * same-as triples: `<id_a> owl:sameAs <id_b> .`

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::classifier::LrModel;
use crate::editing::ComponentReport;
use crate::error::{Error, Result};
use crate::model::{
    ClusterPartition, EmbeddingTable, EntityId, EntityPair, GroundTruth, Label, LabeledPair, Linkset,
    ScoredPair,
};
use crate::synth::{GeneratorConfig, SynthBenchmark};

pub const EMBEDDINGS_FILE: &str = "embeddings.tsv";
pub const TRUTH_FILE: &str = "truth.txt";
pub const GENERATOR_FILE: &str = "generator.conf";

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_embeddings(table: &EmbeddingTable, path: &Path) -> Result<()> {
    let mut out = format!("id\tdim={}\n", table.dim());
    for (i, id) in table.ids().iter().enumerate() {
        out.push_str(id.as_str());
        for x in table.row(i) {
            write!(out, "\t{x}").expect("write to string");
        }
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    let dim = match lines.next() {
        Some((_, header)) => header
            .split_once('\t')
            .filter(|(id, _)| *id == "id")
            .and_then(|(_, d)| d.strip_prefix("dim="))
            .and_then(|d| d.trim().parse::<usize>().ok())
            .ok_or_else(|| Error::parse(path, 1, "expected header `id\\tdim=<D>`"))?,
        None => return Err(Error::parse(path, 1, "empty file")),
    };
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id = EntityId::new(fields.next().unwrap_or_default())
            .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        let v = fields
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        if v.len() != dim {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected {dim} values, found {}", v.len()),
            ));
        }
        rows.push((id, v));
    }
    EmbeddingTable::new(dim, rows)
}

fn csv_rows(path: &Path, header: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::parse(path, 0, format!("{other:?}")),
        })?;
    let found = reader.headers()?.clone();
    if found.iter().collect::<Vec<_>>() != header {
        return Err(Error::parse(path, 1, format!("expected header `{}`", header.join(","))));
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != header.len() {
            return Err(Error::parse(path, line, format!("expected {} fields", header.len())));
        }
        out.push((line, rec));
    }
    Ok(out)
}

fn pair_of(path: &Path, line: usize, rec: &csv::StringRecord) -> Result<EntityPair> {
    let id = |s: &str| EntityId::new(s).map_err(|e| Error::parse(path, line, e.to_string()));
    EntityPair::new(id(&rec[0])?, id(&rec[1])?).map_err(|e| Error::parse(path, line, e.to_string()))
}

fn write_csv<I, R>(path: &Path, header: &[&str], records: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in records {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_labels(labeled: &[LabeledPair], path: &Path) -> Result<()> {
    write_csv(
        path,
        &["id_a", "id_b", "label"],
        labeled.iter().map(|lp| {
            let label = if lp.label.is_duplicate() { "dup" } else { "distinct" };
            [lp.pair.a().as_str(), lp.pair.b().as_str(), label]
        }),
    )
}

/// Reads labeled pairs. A pair labeled twice must carry the same label.
pub fn read_labels(path: &Path) -> Result<Vec<LabeledPair>> {
    let mut out: Vec<LabeledPair> = Vec::new();
    for (line, rec) in csv_rows(path, &["id_a", "id_b", "label"])? {
        let pair = pair_of(path, line, &rec)?;
        let label = match &rec[2] {
            "dup" => Label::Duplicate,
            "distinct" => Label::Distinct,
            other => return Err(Error::parse(path, line, format!("unknown label `{other}`"))),
        };
        out.push(LabeledPair { pair, label });
    }
    out.sort_by(|x, y| x.pair.cmp(&y.pair));
    for w in out.windows(2) {
        if w[0].pair == w[1].pair && w[0].label != w[1].label {
            return Err(Error::parse(path, 0, format!("conflicting labels for {}", w[0].pair)));
        }
    }
    out.dedup_by(|x, y| x.pair == y.pair);
    Ok(out)
}

pub fn write_pairs<'a>(pairs: impl IntoIterator<Item = &'a EntityPair>, path: &Path) -> Result<()> {
    write_csv(
        path,
        &["id_a", "id_b"],
        pairs.into_iter().map(|p| [p.a().as_str(), p.b().as_str()]),
    )
}

pub fn read_pairs(path: &Path) -> Result<Vec<EntityPair>> {
    let mut out = csv_rows(path, &["id_a", "id_b"])?
        .iter()
        .map(|(line, rec)| pair_of(path, *line, rec))
        .collect::<Result<Vec<_>>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

pub fn write_linkset(links: &Linkset, path: &Path) -> Result<()> {
    write_pairs(links.iter(), path)
}

pub fn read_linkset(path: &Path) -> Result<Linkset> {
    Ok(read_pairs(path)?.into_iter().collect())
}

pub fn write_same_as(links: &Linkset, path: &Path) -> Result<()> {
    let mut out = String::new();
    for p in links {
        writeln!(out, "<{}> owl:sameAs <{}> .", p.a(), p.b()).expect("write to string");
    }
    write_text(path, &out)
}

pub fn write_scores(scored: &[ScoredPair], path: &Path) -> Result<()> {
    write_csv(
        path,
        &["id_a", "id_b", "p"],
        scored
            .iter()
            .map(|sp| [sp.pair.a().to_string(), sp.pair.b().to_string(), sp.p.to_string()]),
    )
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoredPair>> {
    let mut out = Vec::new();
    for (line, rec) in csv_rows(path, &["id_a", "id_b", "p"])? {
        let pair = pair_of(path, line, &rec)?;
        let p: f64 = rec[2]
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad probability `{}`", &rec[2])))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::parse(path, line, format!("probability {p} outside [0, 1]")));
        }
        out.push(ScoredPair { pair, p });
    }
    out.sort_by(|x, y| x.pair.cmp(&y.pair));
    for w in out.windows(2) {
        if w[0].pair == w[1].pair {
            return Err(Error::parse(path, 0, format!("pair {} scored twice", w[0].pair)));
        }
    }
    Ok(out)
}

pub fn write_truth(truth: &GroundTruth, path: &Path) -> Result<()> {
    let mut out = String::new();
    for c in truth.clusters.clusters() {
        let ids: Vec<&str> = c.iter().map(EntityId::as_str).collect();
        out.push_str(&ids.join(" "));
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn read_truth(path: &Path) -> Result<GroundTruth> {
    let text = read_text(path)?;
    let mut clusters = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ids = line
            .split_whitespace()
            .map(EntityId::new)
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        clusters.push(ids);
    }
    let partition = ClusterPartition::new(clusters).map_err(|e| Error::parse(path, 0, e.to_string()))?;
    Ok(GroundTruth::new(partition))
}

pub fn write_model(model: &LrModel, path: &Path) -> Result<()> {
    write_text(path, &model.to_text())
}

pub fn read_model(path: &Path) -> Result<LrModel> {
    LrModel::from_text(&read_text(path)?).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::parse(path, line, message),
        other => other,
    })
}

/// `key=value` lines in file order; blank lines and `#` comments skipped.
pub fn read_kv(path: &Path) -> Result<Vec<(String, String)>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, i + 1, "expected key=value"))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn write_kv(pairs: &[(String, String)], path: &Path) -> Result<()> {
    let mut out = String::new();
    for (k, v) in pairs {
        writeln!(out, "{k}={v}").expect("write to string");
    }
    write_text(path, &out)
}

/// One JSON object per line.
pub fn write_repair_report(reports: &[ComponentReport], path: &Path) -> Result<()> {
    let mut out = String::new();
    for r in reports {
        out.push_str(&serde_json::to_string(r).map_err(|e| Error::parse(path, 0, e.to_string()))?);
        out.push('\n');
    }
    write_text(path, &out)
}

/// Writes embeddings, truth clusters and the generator settings into `dir`.
pub fn write_benchmark(bench: &SynthBenchmark, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_embeddings(&bench.embeddings, &dir.join(EMBEDDINGS_FILE))?;
    write_truth(&bench.truth, &dir.join(TRUTH_FILE))?;
    write_text(&dir.join(GENERATOR_FILE), &bench.config.to_kv())
}

pub fn read_benchmark(dir: &Path) -> Result<SynthBenchmark> {
    let config_path = dir.join(GENERATOR_FILE);
    let config = GeneratorConfig::from_kv(&read_text(&config_path)?).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::parse(&config_path, line, message),
        other => other,
    })?;
    Ok(SynthBenchmark {
        embeddings: read_embeddings(&dir.join(EMBEDDINGS_FILE))?,
        truth: read_truth(&dir.join(TRUTH_FILE))?,
        config,
    })
}
