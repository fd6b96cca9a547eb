//! Corpus directories, graph directories and atomic file writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use spikedec::compress::{parse_source_map, CompressedPosteriors};
use spikedec::graph::{BuildManifest, DecodingGraph, TokenTable};
use spikedec::posterior::{decode_binary, decode_text, encode_binary, PosteriorMatrix};
use spikedec::wfst::{arcsort, parse_att, write_att, ArcSortKey, SymbolTable};

pub const GRAPH_FILE: &str = "tlg.fst.txt";
pub const TOKENS_FILE: &str = "tokens.txt";
pub const WORDS_FILE: &str = "words.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes through a temporary file in the same directory, then renames, so a
/// failed run never leaves a truncated file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

pub fn save_graph(dir: &Path, graph: &DecodingGraph) -> Result<()> {
    create_dir(dir)?;
    write_atomic(&dir.join(TOKENS_FILE), graph.tokens.symbols().to_text().as_bytes())?;
    write_atomic(&dir.join(WORDS_FILE), graph.words.to_text().as_bytes())?;
    write_atomic(&dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&graph.manifest)?.as_bytes())?;
    write_atomic(&dir.join(GRAPH_FILE), write_att(&graph.fst, false).as_bytes())
}

pub fn load_graph(dir: &Path) -> Result<DecodingGraph> {
    let tokens = SymbolTable::parse(&read_text(&dir.join(TOKENS_FILE))?).context(TOKENS_FILE)?;
    let tokens = TokenTable::from_symbols(tokens).context(TOKENS_FILE)?;
    let words = SymbolTable::parse(&read_text(&dir.join(WORDS_FILE))?).context(WORDS_FILE)?;
    let fst = parse_att(&read_text(&dir.join(GRAPH_FILE))?, None, None).context(GRAPH_FILE)?;
    let manifest: serde_json::Value = match fs::read_to_string(dir.join(MANIFEST_FILE)) {
        Ok(text) => serde_json::from_str(&text).context(MANIFEST_FILE)?,
        Err(_) => serde_json::Value::Null,
    };
    let use_pushing = manifest["use_pushing"].as_bool().unwrap_or(false);
    Ok(DecodingGraph {
        fst: arcsort(&fst, ArcSortKey::ILabel),
        tokens,
        words,
        manifest: BuildManifest { use_pushing, stages: Vec::new() },
    })
}

/// One utterance in a corpus directory: `<id>.spkf` (or `<id>.txt` in the
/// text format), with an optional `<id>.map` source map next to it.
pub struct CorpusEntry {
    pub id: String,
    pub path: PathBuf,
}

impl CorpusEntry {
    pub fn load(&self) -> Result<PosteriorMatrix> {
        let bytes = fs::read(&self.path).with_context(|| format!("reading {}", self.path.display()))?;
        let p = if self.path.extension().is_some_and(|e| e == "txt") {
            decode_text(std::str::from_utf8(&bytes).context("posterior text is not UTF-8")?)
        } else {
            decode_binary(&bytes)
        };
        p.with_context(|| self.path.display().to_string())
    }

    /// Loads the matrix with its source map when one exists.
    pub fn load_compressed(&self) -> Result<Option<CompressedPosteriors>> {
        let map = self.path.with_extension("map");
        if !map.exists() {
            return Ok(None);
        }
        let sources = parse_source_map(&read_text(&map)?).with_context(|| map.display().to_string())?;
        let c = CompressedPosteriors::new(self.load()?, sources).with_context(|| map.display().to_string())?;
        Ok(Some(c))
    }
}

pub fn list_corpus(dir: &Path) -> Result<Vec<CorpusEntry>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let ext = path.extension().and_then(|e| e.to_str());
        if !matches!(ext, Some("spkf") | Some("txt")) {
            continue;
        }
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_owned();
        out.push(CorpusEntry { id, path });
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = out.windows(2).find(|w| w[0].id == w[1].id) {
        bail!("utterance {} appears twice in {}", w[0].id, dir.display());
    }
    if out.is_empty() {
        bail!("no .spkf or .txt posterior files in {}", dir.display());
    }
    Ok(out)
}

pub fn save_matrix(dir: &Path, id: &str, p: &PosteriorMatrix) -> Result<()> {
    write_atomic(&dir.join(format!("{id}.spkf")), &encode_binary(p))
}
