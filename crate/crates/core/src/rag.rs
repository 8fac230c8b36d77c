//! Knowledge-base retrieval: embedding, cosine top-k search and prompt augmentation.
//!
//! The store is an exhaustive linear scan. The shipped [`HashEmbedder`] is a
//! hashed bag of lowercase word tokens, L2-normalized; other embedders plug in
//! through the [`Embedder`] trait.
//!
//! Knowledge-base files are UTF-8 text where each document starts with a
//! header line `#id <id> tags:<comma-list>` followed by its text lines.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_DIMENSION: usize = 256;
pub const DEFAULT_PROMPT_BUDGET: usize = 4000;
pub const PROMPT_SEPARATOR: &str = "\n---\n";

#[derive(Debug, Error)]
pub enum RagError {
    #[error("text to embed must not be empty")]
    EmptyText,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("k must be positive")]
    ZeroK,
    #[error("document id `{0}` already present")]
    DuplicateId(String),
    #[error("document `{0}` has empty text")]
    EmptyDocument(String),
    #[error("knowledge base {path}:{line}: {reason}")]
    KnowledgeBase { path: PathBuf, line: usize, reason: String },
    #[error("store was built with embedder `{found}`, not `{expected}`")]
    EmbedderMismatch { expected: String, found: String },
    #[error("{path}: {reason}")]
    Store { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("embedder failed: {0}")]
    Embedder(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub tags: Vec<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>, tags: &[&str]) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            tags: tags.iter().map(|t| t.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        EmbeddingVector(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Set when the text produced no tokens.
    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

pub trait Embedder: Send + Sync {
    /// Identifier recorded in persisted stores.
    fn id(&self) -> String;
    fn dimension(&self) -> usize;
    /// Deterministic embedders get their vectors recomputed on load.
    fn deterministic(&self) -> bool {
        true
    }
    /// Embeds non-empty text.
    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, RagError>;
}

/// FNV-1a, 64-bit.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Hashed bag-of-words embedder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    dimension: usize,
}

impl HashEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        HashEmbedder { dimension }
    }

    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a(token.as_bytes()) % self.dimension as u64) as usize
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIMENSION)
    }
}

impl Embedder for HashEmbedder {
    fn id(&self) -> String {
        format!("hash-bow-fnv1a/{}", self.dimension)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, RagError> {
        if text.is_empty() {
            return Err(RagError::EmptyText);
        }
        let mut values = vec![0.0; self.dimension];
        for token in tokenize(text) {
            values[self.bucket(&token)] += 1.0;
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(EmbeddingVector(values))
    }
}

pub fn embed(text: &str, embedder: &dyn Embedder) -> Result<EmbeddingVector, RagError> {
    if text.is_empty() {
        return Err(RagError::EmptyText);
    }
    let v = embedder.embed_text(text)?;
    if v.dimension() != embedder.dimension() {
        return Err(RagError::DimensionMismatch(v.dimension(), embedder.dimension()));
    }
    if v.values().iter().any(|x| !x.is_finite()) {
        return Err(RagError::Embedder("embedding has non-finite components".into()));
    }
    Ok(v)
}

/// `a·b / (‖a‖‖b‖)`, or 0 when either vector is zero.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, RagError> {
    if a.dimension() != b.dimension() {
        return Err(RagError::DimensionMismatch(a.dimension(), b.dimension()));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub document: Document,
    pub score: f64,
}

/// In-memory document store. Reads may run concurrently; mutation needs `&mut`.
pub struct VectorStore {
    embedder: Box<dyn Embedder>,
    entries: Vec<(Document, EmbeddingVector)>,
}

#[derive(Serialize, Deserialize)]
struct StoredDocument {
    #[serde(flatten)]
    document: Document,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vector: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct StoreFile {
    embedder: String,
    dimension: usize,
    documents: Vec<StoredDocument>,
}

impl VectorStore {
    pub fn new(embedder: Box<dyn Embedder>) -> Self {
        VectorStore { embedder, entries: Vec::new() }
    }

    pub fn with_documents(
        embedder: Box<dyn Embedder>,
        documents: impl IntoIterator<Item = Document>,
    ) -> Result<Self, RagError> {
        let mut store = Self::new(embedder);
        for d in documents {
            store.add(d)?;
        }
        Ok(store)
    }

    pub fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.entries.iter().map(|(d, _)| d)
    }

    pub fn add(&mut self, document: Document) -> Result<(), RagError> {
        if document.text.trim().is_empty() {
            return Err(RagError::EmptyDocument(document.id));
        }
        if self.entries.iter().any(|(d, _)| d.id == document.id) {
            return Err(RagError::DuplicateId(document.id));
        }
        let v = embed(&document.text, self.embedder.as_ref())?;
        self.entries.push((document, v));
        Ok(())
    }

    pub fn remove(&mut self, id: &str) -> Option<Document> {
        let pos = self.entries.iter().position(|(d, _)| d.id == id)?;
        Some(self.entries.remove(pos).0)
    }

    /// The `k` most similar documents, by descending score then ascending id.
    pub fn retrieve(&self, query: &str, k: usize) -> Result<Vec<RetrievalHit>, RagError> {
        if k == 0 {
            return Err(RagError::ZeroK);
        }
        let q = embed(query, self.embedder.as_ref())?;
        let mut hits = self
            .entries
            .iter()
            .map(|(d, v)| Ok(RetrievalHit { document: d.clone(), score: cosine_similarity(&q, v)? }))
            .collect::<Result<Vec<_>, RagError>>()?;
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.document.id.cmp(&b.document.id)));
        hits.truncate(k);
        Ok(hits)
    }

    pub fn save(&self, path: &Path) -> Result<(), RagError> {
        let keep_vectors = !self.embedder.deterministic();
        let file = StoreFile {
            embedder: self.embedder.id(),
            dimension: self.embedder.dimension(),
            documents: self
                .entries
                .iter()
                .map(|(d, v)| StoredDocument {
                    document: d.clone(),
                    vector: keep_vectors.then(|| v.values().to_vec()),
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&file).expect("store serializes");
        text.push('\n');
        fs::write(path, text).map_err(|source| RagError::Io { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path, embedder: Box<dyn Embedder>) -> Result<Self, RagError> {
        let text = fs::read_to_string(path).map_err(|source| RagError::Io { path: path.to_path_buf(), source })?;
        let file: StoreFile = serde_json::from_str(&text)
            .map_err(|e| RagError::Store { path: path.to_path_buf(), reason: e.to_string() })?;
        if file.embedder != embedder.id() {
            return Err(RagError::EmbedderMismatch { expected: embedder.id(), found: file.embedder });
        }
        if file.dimension != embedder.dimension() {
            return Err(RagError::DimensionMismatch(file.dimension, embedder.dimension()));
        }
        let mut store = VectorStore::new(embedder);
        let mut ids = HashSet::new();
        for StoredDocument { document, vector } in file.documents {
            if !ids.insert(document.id.clone()) {
                return Err(RagError::DuplicateId(document.id));
            }
            match vector {
                Some(values) => {
                    if values.len() != store.embedder.dimension() {
                        return Err(RagError::DimensionMismatch(values.len(), store.embedder.dimension()));
                    }
                    store.entries.push((document, EmbeddingVector(values)));
                }
                None => store.add(document)?,
            }
        }
        Ok(store)
    }
}

/// Parses the knowledge-base text format.
pub fn parse_knowledge_base(text: &str, origin: &Path) -> Result<Vec<Document>, RagError> {
    let err = |line: usize, reason: String| RagError::KnowledgeBase { path: origin.to_path_buf(), line, reason };
    let mut docs: Vec<Document> = Vec::new();
    let mut current: Option<(Document, Vec<&str>, usize)> = None;
    let finish = |cur: Option<(Document, Vec<&str>, usize)>, docs: &mut Vec<Document>| {
        if let Some((mut doc, lines, at)) = cur {
            doc.text = lines.join("\n").trim().to_string();
            if doc.text.is_empty() {
                return Err(err(at, format!("document `{}` has no text", doc.id)));
            }
            if docs.iter().any(|d| d.id == doc.id) {
                return Err(err(at, format!("duplicate document id `{}`", doc.id)));
            }
            docs.push(doc);
        }
        Ok(())
    };
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if let Some(rest) = line.strip_prefix("#id ") {
            finish(current.take(), &mut docs)?;
            let rest = rest.trim();
            let (id, tags) = match rest.find(" tags:") {
                Some(pos) => (&rest[..pos], &rest[pos + 6..]),
                None => match rest.strip_prefix("tags:") {
                    Some(_) => ("", ""),
                    None => (rest, ""),
                },
            };
            let id = id.trim();
            if id.is_empty() || id.contains(char::is_whitespace) {
                return Err(err(n, format!("invalid document id in header `{line}`")));
            }
            let tags = tags.split(',').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect();
            current = Some((Document { id: id.to_string(), text: String::new(), tags }, Vec::new(), n));
        } else if let Some((_, lines, _)) = current.as_mut() {
            lines.push(line);
        } else if !line.trim().is_empty() {
            return Err(err(n, "text before the first `#id` header".into()));
        }
    }
    finish(current.take(), &mut docs)?;
    Ok(docs)
}

pub fn format_knowledge_base(docs: &[Document]) -> String {
    let mut out = String::new();
    for d in docs {
        let _ = writeln!(out, "#id {} tags:{}", d.id, d.tags.join(","));
        let _ = writeln!(out, "{}", d.text);
    }
    out
}

/// Reads a knowledge-base file, or every regular file of a directory in name order.
pub fn read_knowledge_base(path: &Path) -> Result<Vec<Document>, RagError> {
    let io = |source| RagError::Io { path: path.to_path_buf(), source };
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        let mut docs: Vec<Document> = Vec::new();
        for f in files {
            for d in read_knowledge_base(&f)? {
                if docs.iter().any(|o| o.id == d.id) {
                    return Err(RagError::DuplicateId(d.id));
                }
                docs.push(d);
            }
        }
        Ok(docs)
    } else {
        let text = fs::read_to_string(path).map_err(io)?;
        parse_knowledge_base(&text, path)
    }
}

/// The query, a separator, then `[id] text` for each hit in rank order.
///
/// Output is capped at `budget` characters, except that the query and
/// separator are always kept whole; hit text is cut from the lowest rank up.
pub fn augment_prompt_with_budget(query: &str, hits: &[RetrievalHit], budget: usize) -> String {
    let mut out = String::with_capacity(query.len() + PROMPT_SEPARATOR.len());
    out.push_str(query);
    out.push_str(PROMPT_SEPARATOR);
    let mut remaining = budget.saturating_sub(out.chars().count());
    for hit in hits {
        let entry = format!("[{}] {}\n", hit.document.id, hit.document.text);
        let len = entry.chars().count();
        if len <= remaining {
            out.push_str(&entry);
            remaining -= len;
        } else {
            out.extend(entry.chars().take(remaining));
            break;
        }
    }
    out
}

pub fn augment_prompt(query: &str, hits: &[RetrievalHit]) -> String {
    augment_prompt_with_budget(query, hits, DEFAULT_PROMPT_BUDGET)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(x.to_vec())
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&v(&[1.0, 0.0]), &v(&[1.0, 0.0])).unwrap() - 1.0).abs() < 1e-9);
        assert!(cosine_similarity(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap().abs() < 1e-9);
        let s = cosine_similarity(&v(&[1.0, 1.0]), &v(&[1.0, 0.0])).unwrap();
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert_eq!(cosine_similarity(&v(&[0.0, 0.0]), &v(&[1.0, 0.0])).unwrap(), 0.0);
        assert!(matches!(
            cosine_similarity(&v(&[1.0]), &v(&[1.0, 0.0])),
            Err(RagError::DimensionMismatch(1, 2))
        ));
    }

    #[test]
    fn embedding_is_deterministic_and_rejects_empty() {
        let e = HashEmbedder::default();
        assert_eq!(embed("x", &e).unwrap(), embed("x", &e).unwrap());
        assert!(matches!(embed("", &e), Err(RagError::EmptyText)));
        let zero = embed("?!", &e).unwrap();
        assert!(zero.is_zero());
        assert_eq!(zero.dimension(), DEFAULT_DIMENSION);
    }

    #[test]
    fn disjoint_tokens_are_orthogonal() {
        let e = HashEmbedder::new(1 << 16);
        let a = "macro station cost radius";
        let b = "micro coverage weak traffic";
        let ba: HashSet<usize> = tokenize(a).map(|t| e.bucket(&t)).collect();
        let bb: HashSet<usize> = tokenize(b).map(|t| e.bucket(&t)).collect();
        assert!(ba.is_disjoint(&bb), "bucket collision; pick other tokens");
        let s = cosine_similarity(&embed(a, &e).unwrap(), &embed(b, &e).unwrap()).unwrap();
        assert_eq!(s, 0.0);
    }

    fn corpus() -> Vec<Document> {
        vec![
            Document::new("a", "simulated annealing cooling schedule", &["solver"]),
            Document::new("b", "greedy coverage per cost placement", &["solver"]),
            Document::new("c", "minimum distance between stations", &["constraint"]),
            Document::new("d", "greedy placement of micro stations", &["recipe"]),
            Document::new("e", "traffic hotspots in weak coverage areas", &["data"]),
        ]
    }

    #[test]
    fn retrieval_matches_hand_ranking() {
        let store = VectorStore::with_documents(Box::new(HashEmbedder::new(1 << 16)), corpus()).unwrap();
        let query = "greedy placement of stations";
        let hits = store.retrieve(query, 5).unwrap();
        // Unit-count bag-of-words: score = shared / sqrt(|q| * |d|).
        let q: HashSet<String> = tokenize(query).collect();
        let mut expected: Vec<(String, f64)> = corpus()
            .iter()
            .map(|d| {
                let t: HashSet<String> = tokenize(&d.text).collect();
                let shared = q.intersection(&t).count() as f64;
                (d.id.clone(), shared / ((q.len() * t.len()) as f64).sqrt())
            })
            .collect();
        expected.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let got: Vec<&str> = hits.iter().map(|h| h.document.id.as_str()).collect();
        let want: Vec<&str> = expected.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(got, want);
        for (h, (_, s)) in hits.iter().zip(&expected) {
            assert!((h.score - s).abs() < 1e-12);
        }
        assert_eq!(hits[0].document.id, "d");
    }

    #[test]
    fn retrieval_edge_cases() {
        let store =
            VectorStore::with_documents(Box::new(HashEmbedder::default()), corpus()[..1].to_vec()).unwrap();
        let hits = store.retrieve("anything", 1).unwrap();
        assert_eq!(hits.len(), 1);
        assert!(matches!(store.retrieve("x", 0), Err(RagError::ZeroK)));

        let store = VectorStore::with_documents(Box::new(HashEmbedder::default()), corpus()).unwrap();
        let hits = store.retrieve("minimum distance between stations", 2).unwrap();
        assert_eq!(hits[0].document.id, "c");
        assert!((hits[0].score - 1.0).abs() < 1e-9);
        assert_eq!(store.retrieve("x y z", 50).unwrap().len(), 5);
    }

    #[test]
    fn store_rejects_duplicates_and_removes() {
        let mut store = VectorStore::new(Box::new(HashEmbedder::default()));
        store.add(Document::new("a", "one", &[])).unwrap();
        assert!(matches!(store.add(Document::new("a", "two", &[])), Err(RagError::DuplicateId(_))));
        assert!(matches!(store.add(Document::new("b", "  ", &[])), Err(RagError::EmptyDocument(_))));
        assert_eq!(store.remove("a").unwrap().text, "one");
        assert!(store.is_empty());
    }

    #[test]
    fn knowledge_base_format() {
        let text = "#id sa-recipe tags:solver,sa\nUse simulated annealing.\nCool slowly.\n#id dmin tags:\nKeep stations apart.\n";
        let docs = parse_knowledge_base(text, Path::new("kb.txt")).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].id, "sa-recipe");
        assert_eq!(docs[0].tags, vec!["solver", "sa"]);
        assert_eq!(docs[0].text, "Use simulated annealing.\nCool slowly.");
        assert!(docs[1].tags.is_empty());
        assert_eq!(parse_knowledge_base(&format_knowledge_base(&docs), Path::new("kb")).unwrap(), docs);
        assert!(parse_knowledge_base("stray\n#id a\nx\n", Path::new("kb")).is_err());
        assert!(parse_knowledge_base("#id a\n\n#id b\nx\n", Path::new("kb")).is_err());
    }

    #[test]
    fn store_roundtrip_keeps_results() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.json");
        let store = VectorStore::with_documents(Box::new(HashEmbedder::default()), corpus()).unwrap();
        store.save(&path).unwrap();
        let back = VectorStore::load(&path, Box::new(HashEmbedder::default())).unwrap();
        for q in ["greedy", "weak coverage traffic", "cooling"] {
            assert_eq!(store.retrieve(q, 3).unwrap(), back.retrieve(q, 3).unwrap());
        }
        assert!(matches!(
            VectorStore::load(&path, Box::new(HashEmbedder::new(8))),
            Err(RagError::EmbedderMismatch { .. })
        ));
    }

    #[test]
    fn prompt_augmentation() {
        assert_eq!(augment_prompt("q", &[]), format!("q{PROMPT_SEPARATOR}"));
        let hits = vec![
            RetrievalHit { document: Document::new("one", "first text", &[]), score: 0.9 },
            RetrievalHit { document: Document::new("two", "second text is longer", &[]), score: 0.5 },
        ];
        let full = augment_prompt("q", &hits);
        let i1 = full.find("[one] first text").unwrap();
        let i2 = full.find("[two] second text is longer").unwrap();
        assert!(i1 < i2);

        let base = format!("q{PROMPT_SEPARATOR}[one] first text\n").chars().count();
        let cut = augment_prompt_with_budget("q", &hits, base + 8);
        assert!(cut.contains("[one] first text\n"));
        assert!(cut.ends_with("[two] se"));
        assert_eq!(cut.chars().count(), base + 8);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vector() -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(-100.0f64..100.0, 6)
        }

        proptest! {
            #[test]
            fn self_similarity_symmetry_and_scale(a in vector(), b in vector(), c in 0.01f64..100.0) {
                let va = EmbeddingVector::new(a.clone());
                let vb = EmbeddingVector::new(b);
                if va.norm() > 1e-6 {
                    prop_assert!((cosine_similarity(&va, &va).unwrap() - 1.0).abs() < 1e-9);
                }
                let ab = cosine_similarity(&va, &vb).unwrap();
                prop_assert_eq!(ab, cosine_similarity(&vb, &va).unwrap());
                let scaled = EmbeddingVector::new(a.iter().map(|x| x * c).collect());
                prop_assert!((cosine_similarity(&scaled, &vb).unwrap() - ab).abs() < 1e-9);
            }
        }
    }
}
