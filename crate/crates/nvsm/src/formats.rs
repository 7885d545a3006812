//! TREC run files, qrels, topics, corpora, stopword lists and metric reports.

use crate::error::{Error, Result};
use nvsm_core::corpus::RawDocument;
use nvsm_core::eval::{MetricReport, Qrels};
use nvsm_core::retrieval::RankedEntry;
use nvsm_core::RankedList;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

pub fn read_text(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes)
        .map_err(|_| Error::format(format!("{}: not valid UTF-8", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Renders `query_id Q0 doc rank score tag` lines, scores to six decimals.
pub fn format_run(lists: &[RankedList], tag: &str) -> Result<String> {
    if tag.is_empty() || tag.chars().any(char::is_whitespace) {
        return Err(Error::Usage(format!(
            "run tag `{tag}` must be one non-empty word"
        )));
    }
    let mut out = String::new();
    for list in lists {
        for e in &list.entries {
            writeln!(
                out,
                "{} Q0 {} {} {:.6} {}",
                list.query_id, e.doc, e.rank, e.score, tag
            )
            .unwrap();
        }
    }
    Ok(out)
}

/// A parsed run file: rankings in file order plus the run tag.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFile {
    pub lists: Vec<RankedList>,
    pub tag: String,
}

/// Parses a run file. Entries keep their file order and rank fields; every
/// query must occupy one contiguous block and all lines share one tag.
pub fn parse_run(text: &str) -> Result<RunFile> {
    let mut lists: Vec<RankedList> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut tag: Option<String> = None;
    for (i, line) in text.lines().enumerate() {
        let err = |msg: &str| Error::format(format!("run line {}: {msg}", i + 1));
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 6 {
            return Err(err("expected 6 fields"));
        }
        let rank: u32 = f[3].parse().map_err(|_| err("rank is not an integer"))?;
        let score: f64 = f[4].parse().map_err(|_| err("score is not a number"))?;
        if !score.is_finite() {
            return Err(err("score is not finite"));
        }
        match &tag {
            None => tag = Some(f[5].to_string()),
            Some(t) if t != f[5] => return Err(err("run tag changes within the file")),
            Some(_) => {}
        }
        if lists.last().is_none_or(|l| l.query_id != f[0]) {
            if !seen.insert(f[0].to_string()) {
                return Err(err("query appears in two separate blocks"));
            }
            lists.push(RankedList {
                query_id: f[0].to_string(),
                entries: Vec::new(),
            });
        }
        lists.last_mut().unwrap().entries.push(RankedEntry {
            doc: f[2].to_string(),
            score,
            rank,
        });
    }
    let tag = tag.ok_or_else(|| Error::format("run file is empty"))?;
    Ok(RunFile { lists, tag })
}

/// Parses `query_id 0 doc grade` lines. Negative grades count as 0.
pub fn parse_qrels(text: &str) -> Result<Qrels> {
    let mut qrels = Qrels::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(Error::format(format!(
                "qrels line {}: expected 4 fields",
                i + 1
            )));
        }
        let grade: i64 = f[3]
            .parse()
            .map_err(|_| Error::format(format!("qrels line {}: grade is not an integer", i + 1)))?;
        qrels.insert(f[0], f[2], u32::try_from(grade.max(0)).unwrap_or(u32::MAX));
    }
    Ok(qrels)
}

pub fn format_qrels(qrels: &Qrels) -> String {
    let mut out = String::new();
    for (q, d, g) in qrels.iter() {
        writeln!(out, "{q} 0 {d} {g}").unwrap();
    }
    out
}

/// Parses `query_id<TAB>title text` lines in file order.
pub fn parse_topics(text: &str) -> Result<Vec<(String, String)>> {
    let mut seen = BTreeSet::new();
    let mut topics = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, title) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(format!("topics line {}: missing tab", i + 1)))?;
        let id = id.trim();
        if id.is_empty() || id.contains(char::is_whitespace) {
            return Err(Error::format(format!(
                "topics line {}: bad query id",
                i + 1
            )));
        }
        if !seen.insert(id.to_string()) {
            return Err(Error::format(format!(
                "topics line {}: duplicate query `{id}`",
                i + 1
            )));
        }
        topics.push((id.to_string(), title.to_string()));
    }
    Ok(topics)
}

pub fn format_topics(topics: &[(String, String)]) -> String {
    topics.iter().map(|(q, t)| format!("{q}\t{t}\n")).collect()
}

/// Reads a corpus from a directory (one document per file, named after the
/// file, in sorted order) or a `name<TAB>text` file.
pub fn read_corpus(path: &Path) -> Result<Vec<RawDocument>> {
    if path.is_dir() {
        let mut entries = Vec::new();
        for entry in std::fs::read_dir(path).map_err(|e| Error::io(path, e))? {
            let entry = entry.map_err(|e| Error::io(path, e))?;
            let p = entry.path();
            if p.is_file() {
                let name = entry.file_name().into_string().map_err(|_| {
                    Error::format(format!("{}: file name is not UTF-8", p.display()))
                })?;
                entries.push((name, p));
            }
        }
        entries.sort();
        entries
            .into_iter()
            .map(|(name, p)| Ok(RawDocument::new(name, read_text(&p)?)))
            .collect()
    } else {
        let text = read_text(path)?;
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, line)| {
                let (name, body) = line
                    .split_once('\t')
                    .ok_or_else(|| Error::format(format!("corpus line {}: missing tab", i + 1)))?;
                Ok(RawDocument::new(name.trim(), body))
            })
            .collect()
    }
}

pub fn format_corpus(docs: &[RawDocument]) -> String {
    docs.iter()
        .map(|d| format!("{}\t{}\n", d.name, d.text))
        .collect()
}

/// Whitespace-separated words, lowercased; `#` starts a comment.
pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace)
        .map(str::to_lowercase)
        .collect()
}

pub fn load_stopwords(path: Option<&Path>) -> Result<BTreeSet<String>> {
    match path {
        Some(p) => Ok(parse_stopwords(&read_text(p)?)),
        None => Ok(parse_stopwords(DEFAULT_STOPWORDS)),
    }
}

/// `metric query value` lines followed by `metric all mean`, four decimals.
pub fn format_report(report: &MetricReport) -> String {
    type Pick = fn(&nvsm_core::eval::QueryMetrics) -> f64;
    let metrics: [(&str, Pick, f64); 3] = [
        (
            "map",
            |q| q.average_precision,
            report.mean_average_precision(),
        ),
        ("ndcg_cut_100", |q| q.ndcg, report.mean_ndcg()),
        ("P_10", |q| q.precision, report.mean_precision()),
    ];
    let mut out = String::new();
    for (name, pick, mean) in metrics {
        for q in &report.queries {
            writeln!(out, "{name} {} {:.4}", q.query_id, pick(q)).unwrap();
        }
        writeln!(out, "{name} all {mean:.4}").unwrap();
    }
    out
}
