//! Text file formats.
//!
//! * embeddings: `#dim <d>` then `name<TAB>x1<TAB>…<TAB>xd`
//! * samples: `#dim <d>` then `id<TAB>leaf<TAB>x1<TAB>…<TAB>xd`
//! * params: `dim<TAB>d`, `tau<TAB>τ`, d lines `A<TAB>row`, one line `c<TAB>…`
//! * report: `key<TAB>value` lines; cut detail: `beta<TAB>cut_size<TAB>accuracy`
//!
//! Other lines starting with `#` are comments. Floats are written with the
//! shortest representation that parses back to the same value.

use std::fmt::Write as _;
use std::path::Path;

use crate::classifier::{EmbeddingTable, PromptParams, SampleSet};
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::taxonomy::{LabelSet, TaxonomyTree};
use crate::trainer::TrainLog;

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.display().to_string(),
            detail: e.to_string(),
        })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

fn parse_float(line: usize, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(line, format!("not a number: {s:?}")))
}

fn join_floats(out: &mut String, xs: &[f64]) {
    for x in xs {
        let _ = write!(out, "\t{x}");
    }
}

/// Non-comment lines with their 1-based numbers, plus the `#dim` header.
fn dim_and_records(text: &str) -> Result<(usize, Vec<(usize, &str)>)> {
    let mut dim = None;
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if let Some(rest) = line.strip_prefix("#dim") {
            if dim.is_some() {
                return Err(Error::parse(i + 1, "repeated #dim header"));
            }
            let d = rest
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::parse(i + 1, "bad #dim header"))?;
            dim = Some(d);
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if dim.is_none() {
            return Err(Error::parse(i + 1, "missing `#dim <d>` header"));
        }
        records.push((i + 1, line));
    }
    let dim = dim.ok_or(Error::EmptyDocument)?;
    if dim == 0 {
        return Err(Error::parse(1, "dim must be positive"));
    }
    Ok((dim, records))
}

pub fn parse_embeddings(tree: &TaxonomyTree, text: &str) -> Result<EmbeddingTable> {
    let (dim, records) = dim_and_records(text)?;
    let mut entries = Vec::with_capacity(records.len());
    for (line, rec) in records {
        let mut fields = rec.split('\t');
        let name = fields.next().unwrap_or_default().to_string();
        let v = fields
            .map(|f| parse_float(line, f))
            .collect::<Result<Vec<_>>>()?;
        if v.len() != dim {
            return Err(Error::parse(
                line,
                format!("expected {dim} values, got {}", v.len()),
            ));
        }
        entries.push((name, v));
    }
    EmbeddingTable::from_named(tree, dim, entries)
}

pub fn format_embeddings(
    tree: &TaxonomyTree,
    emb: &EmbeddingTable,
    header: Option<&str>,
) -> String {
    let mut out = format!("#dim {}\n", emb.dim());
    if let Some(h) = header {
        let _ = writeln!(out, "# {h}");
    }
    for node in 0..tree.len() {
        if node == tree.root() {
            continue;
        }
        out.push_str(tree.name(node));
        join_floats(&mut out, emb.vector(node));
        out.push('\n');
    }
    out
}

pub fn parse_samples(tree: &TaxonomyTree, text: &str) -> Result<SampleSet> {
    let (dim, records) = dim_and_records(text)?;
    let mut ids = Vec::with_capacity(records.len());
    let mut leaves = Vec::with_capacity(records.len());
    let mut features = Vec::with_capacity(records.len());
    for (line, rec) in records {
        let mut fields = rec.split('\t');
        let id = fields.next().unwrap_or_default().to_string();
        let leaf_name = fields
            .next()
            .ok_or_else(|| Error::parse(line, "expected `id<TAB>leaf<TAB>values`"))?;
        let v = fields
            .map(|f| parse_float(line, f))
            .collect::<Result<Vec<_>>>()?;
        if v.len() != dim {
            return Err(Error::parse(
                line,
                format!("expected {dim} values, got {}", v.len()),
            ));
        }
        ids.push(id);
        leaves.push(tree.index_of(leaf_name)?);
        features.push(v);
    }
    SampleSet::new(tree, dim, ids, leaves, features)
}

pub fn format_samples(tree: &TaxonomyTree, data: &SampleSet, header: Option<&str>) -> String {
    let mut out = format!("#dim {}\n", data.dim());
    if let Some(h) = header {
        let _ = writeln!(out, "# {h}");
    }
    for i in 0..data.len() {
        let _ = write!(out, "{}\t{}", data.id(i), tree.name(data.leaf(i)));
        join_floats(&mut out, data.feature(i));
        out.push('\n');
    }
    out
}

pub fn parse_params(text: &str) -> Result<PromptParams> {
    let mut dim = None;
    let mut tau = None;
    let mut a = Vec::new();
    let mut a_rows = 0;
    let mut c = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        let lineno = i + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let key = fields.next().unwrap_or_default();
        let values: Vec<&str> = fields.collect();
        let floats = || {
            values
                .iter()
                .map(|f| parse_float(lineno, f))
                .collect::<Result<Vec<_>>>()
        };
        match key {
            "dim" => {
                let [d] = values.as_slice() else {
                    return Err(Error::parse(lineno, "dim takes one value"));
                };
                dim = Some(
                    d.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::parse(lineno, "bad dim"))?,
                );
            }
            "tau" => {
                let v = floats()?;
                if v.len() != 1 {
                    return Err(Error::parse(lineno, "tau takes one value"));
                }
                tau = Some(v[0]);
            }
            "A" => {
                a.extend(floats()?);
                a_rows += 1;
            }
            "c" => c = Some(floats()?),
            other => return Err(Error::parse(lineno, format!("unknown key {other:?}"))),
        }
    }
    let dim = dim.ok_or_else(|| Error::parse(0, "missing dim"))?;
    let tau = tau.ok_or_else(|| Error::parse(0, "missing tau"))?;
    let c = c.ok_or_else(|| Error::parse(0, "missing c"))?;
    if a_rows != dim || a.len() != dim * dim {
        return Err(Error::parse(
            0,
            format!("A must have {dim} rows of {dim} values"),
        ));
    }
    PromptParams::new(dim, a, c, tau)
}

pub fn format_params(params: &PromptParams, header: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        let _ = writeln!(out, "# {h}");
    }
    let _ = writeln!(out, "dim\t{}", params.dim);
    let _ = writeln!(out, "tau\t{}", params.tau);
    for row in params.a.chunks_exact(params.dim) {
        out.push('A');
        join_floats(&mut out, row);
        out.push('\n');
    }
    out.push('c');
    join_floats(&mut out, &params.c);
    out.push('\n');
    out
}

/// `sample-cuts` listing: a `# beta=… seed=…` line, then one cut per line.
pub fn format_cuts(tree: &TaxonomyTree, cuts: &[LabelSet], beta: f64, seed: u64) -> String {
    let mut out = format!("# beta={beta} seed={seed}\n");
    for cut in cuts {
        out.push_str(&cut.names(tree).join("\t"));
        out.push('\n');
    }
    out
}

fn format_betas(betas: impl Iterator<Item = f64>) -> String {
    betas.map(|b| b.to_string()).collect::<Vec<_>>().join(",")
}

pub fn format_report(report: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "n_samples\t{}", report.n_samples);
    let _ = writeln!(out, "leaf_acc\t{}", report.leaf_acc);
    let _ = writeln!(out, "hca\t{}", report.hca);
    let _ = writeln!(out, "mta\t{}", report.mta.mta);
    for b in &report.mta.per_beta {
        let _ = writeln!(out, "mta_beta_{}\t{}", b.beta, b.mta);
    }
    for b in &report.mta.per_beta {
        let _ = writeln!(out, "cuts_beta_{}\t{}", b.beta, b.cuts);
    }
    let _ = writeln!(out, "cuts_total\t{}", report.mta.cuts.len());
    let _ = writeln!(
        out,
        "betas\t{}",
        format_betas(report.mta.per_beta.iter().map(|b| b.beta))
    );
    let _ = writeln!(out, "T\t{}", report.cuts_per_beta);
    let _ = writeln!(out, "seed\t{}", report.seed);
    out
}

/// Parses a `key<TAB>value` report into ordered pairs.
pub fn parse_report(text: &str) -> Result<Vec<(String, String)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty())
        .map(|(i, l)| {
            l.split_once('\t')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::parse(i + 1, "expected key<TAB>value"))
        })
        .collect()
}

pub fn format_cut_detail(report: &MetricsReport) -> String {
    let mut out = String::from("beta\tcut_size\taccuracy\n");
    for cut in &report.mta.cuts {
        let _ = writeln!(out, "{}\t{}\t{}", cut.beta, cut.members.len(), cut.accuracy);
    }
    out
}

pub fn format_train_log(log: &TrainLog, header: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        let _ = writeln!(out, "# {h}");
    }
    out.push_str("iteration\tepoch\tlr\tcut_size\tdtl\tncl\ttotal\n");
    for r in &log.records {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.iteration, r.epoch, r.lr, r.cut_size, r.dtl, r.ncl, r.total
        );
    }
    let _ = writeln!(out, "# params_sha256={}", log.params_digest);
    out
}
