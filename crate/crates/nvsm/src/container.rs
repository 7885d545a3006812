//! Versioned binary container of named tensors.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "NVSMCTR\0" | version u32 | kind u8
//! metadata count u32 | { name | value u64 }*
//! tensor count u32   | { name | type u8 | rank u32 | dims u64* | data }*
//! ```
//!
//! A name is a u32 byte length followed by UTF-8. Tensor data is row-major.

use crate::error::{Error, Result};
use nvsm_core::corpus::{DocumentStore, Vocabulary};
use nvsm_core::linalg::Matrix;
use nvsm_core::ModelParameters;
use sha2::{Digest, Sha256};
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: [u8; 8] = *b"NVSMCTR\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContainerKind {
    Model = 1,
    Store = 2,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    U32(Vec<u32>),
    U64(Vec<u64>),
    U8(Vec<u8>),
}

impl TensorData {
    fn tag(&self) -> u8 {
        match self {
            TensorData::F32(_) => 1,
            TensorData::U32(_) => 2,
            TensorData::U64(_) => 3,
            TensorData::U8(_) => 4,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::U32(v) => v.len(),
            TensorData::U64(v) => v.len(),
            TensorData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<u64>,
    pub data: TensorData,
}

impl Tensor {
    pub fn new(name: &str, dims: Vec<u64>, data: TensorData) -> Self {
        Tensor {
            name: name.to_string(),
            dims,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: ContainerKind,
    pub metadata: Vec<(String, u64)>,
    pub tensors: Vec<Tensor>,
}

fn put_name(out: &mut Vec<u8>, name: &str) {
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
}

impl Container {
    pub fn meta(&self, key: &str) -> Result<u64> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::format(format!("container lacks metadata `{key}`")))
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::format(format!("container lacks tensor `{name}`")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(self.kind as u8);
        out.extend_from_slice(&(self.metadata.len() as u32).to_le_bytes());
        for (k, v) in &self.metadata {
            put_name(&mut out, k);
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            put_name(&mut out, &t.name);
            out.push(t.data.tag());
            out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
            for d in &t.dims {
                out.extend_from_slice(&d.to_le_bytes());
            }
            match &t.data {
                TensorData::F32(v) => v
                    .iter()
                    .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
                TensorData::U32(v) => v
                    .iter()
                    .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
                TensorData::U64(v) => v
                    .iter()
                    .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
                TensorData::U8(v) => out.extend_from_slice(v),
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::format("not an nvsm container"));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::format(format!(
                "unsupported container version {version}"
            )));
        }
        let kind = match r.u8()? {
            1 => ContainerKind::Model,
            2 => ContainerKind::Store,
            k => return Err(Error::format(format!("unknown container kind {k}"))),
        };
        let n_meta = r.u32()?;
        let mut metadata = Vec::new();
        for _ in 0..n_meta {
            let k = r.name()?;
            metadata.push((k, r.u64()?));
        }
        let n_tensors = r.u32()?;
        let mut tensors = Vec::new();
        for _ in 0..n_tensors {
            let name = r.name()?;
            let tag = r.u8()?;
            let rank = r.u32()?;
            let dims = (0..rank).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
            let count = dims
                .iter()
                .try_fold(1u64, |acc, &d| acc.checked_mul(d))
                .and_then(|c| usize::try_from(c).ok())
                .ok_or_else(|| Error::format("tensor dimensions overflow"))?;
            let data = match tag {
                1 => TensorData::F32(
                    r.chunks(count, 4)?
                        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                ),
                2 => TensorData::U32(
                    r.chunks(count, 4)?
                        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                ),
                3 => TensorData::U64(
                    r.chunks(count, 8)?
                        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                ),
                4 => TensorData::U8(r.take(count)?.to_vec()),
                t => {
                    return Err(Error::format(format!(
                        "unknown tensor type {t} in `{name}`"
                    )))
                }
            };
            tensors.push(Tensor { name, dims, data });
        }
        if r.pos != bytes.len() {
            return Err(Error::format("trailing bytes after container"));
        }
        Ok(Container {
            kind,
            metadata,
            tensors,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::format("container is truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn chunks(&mut self, count: usize, width: usize) -> Result<std::slice::ChunksExact<'a, u8>> {
        let n = count
            .checked_mul(width)
            .ok_or_else(|| Error::format("tensor too large"))?;
        Ok(self.take(n)?.chunks_exact(width))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn name(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| Error::format("name is not UTF-8"))
    }
}

/// First eight bytes of SHA-256 over the terms in id order.
pub fn vocabulary_hash(vocabulary: &Vocabulary) -> u64 {
    let mut h = Sha256::new();
    for t in vocabulary.terms() {
        h.update(t.as_bytes());
        h.update([0u8]);
    }
    u64::from_be_bytes(h.finalize()[..8].try_into().unwrap())
}

fn matrix_tensor(name: &str, m: &Matrix) -> Tensor {
    Tensor::new(
        name,
        vec![m.rows() as u64, m.cols() as u64],
        TensorData::F32(m.as_slice().iter().map(|&x| x as f32).collect()),
    )
}

fn f32_tensor(c: &Container, name: &str, dims: &[u64]) -> Result<Vec<f64>> {
    let t = c.tensor(name)?;
    if t.dims != dims {
        return Err(Error::format(format!(
            "tensor `{name}` has shape {:?}, expected {dims:?}",
            t.dims
        )));
    }
    match &t.data {
        TensorData::F32(v) => Ok(v.iter().map(|&x| f64::from(x)).collect()),
        _ => Err(Error::format(format!("tensor `{name}` is not f32"))),
    }
}

fn as_usize(v: u64) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::format("dimension does not fit in memory"))
}

/// Serializes a model. Parameters are narrowed to 32-bit floats.
pub fn model_container(params: &ModelParameters, vocabulary_hash: u64) -> Container {
    Container {
        kind: ContainerKind::Model,
        metadata: vec![
            ("format_version".into(), u64::from(FORMAT_VERSION)),
            ("word_dim".into(), params.word_dim() as u64),
            ("doc_dim".into(), params.doc_dim() as u64),
            ("ngram_width".into(), params.ngram_width as u64),
            ("vocabulary_size".into(), params.vocabulary_size() as u64),
            ("num_documents".into(), params.num_documents() as u64),
            ("iterations".into(), u64::from(params.iterations)),
            ("vocabulary_hash".into(), vocabulary_hash),
        ],
        tensors: vec![
            matrix_tensor("word", &params.word),
            matrix_tensor("doc", &params.doc),
            matrix_tensor("transform", &params.transform),
            Tensor::new(
                "bias",
                vec![params.bias.len() as u64],
                TensorData::F32(params.bias.iter().map(|&x| x as f32).collect()),
            ),
        ],
    }
}

/// A loaded model with the vocabulary hash it was trained against.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredModel {
    pub params: ModelParameters,
    pub vocabulary_hash: u64,
}

impl StoredModel {
    /// Fails unless the model was trained on `store`'s vocabulary and documents.
    pub fn check_store(&self, store: &DocumentStore) -> Result<()> {
        if self.vocabulary_hash != vocabulary_hash(store.vocabulary())
            || self.params.num_documents() != store.len()
        {
            return Err(Error::format("model was not trained on this store"));
        }
        Ok(())
    }
}

pub fn model_from_container(c: &Container) -> Result<StoredModel> {
    if c.kind != ContainerKind::Model {
        return Err(Error::format("container does not hold a model"));
    }
    if c.meta("format_version")? != u64::from(FORMAT_VERSION) {
        return Err(Error::format("model metadata has an unsupported version"));
    }
    let dw = c.meta("word_dim")?;
    let dd = c.meta("doc_dim")?;
    let v = c.meta("vocabulary_size")?;
    let d = c.meta("num_documents")?;
    let n = as_usize(c.meta("ngram_width")?)?;
    let iterations = u32::try_from(c.meta("iterations")?)
        .map_err(|_| Error::format("iteration count overflows"))?;
    let matrix = |name: &str, rows: u64, cols: u64| -> Result<Matrix> {
        Ok(Matrix::from_vec(
            as_usize(rows)?,
            as_usize(cols)?,
            f32_tensor(c, name, &[rows, cols])?,
        ))
    };
    let params = ModelParameters {
        word: matrix("word", v, dw)?,
        doc: matrix("doc", d, dd)?,
        transform: matrix("transform", dd, dw)?,
        bias: f32_tensor(c, "bias", &[dd])?,
        ngram_width: n,
        iterations,
    };
    params.validate()?;
    Ok(StoredModel {
        params,
        vocabulary_hash: c.meta("vocabulary_hash")?,
    })
}

pub fn save_model(path: &Path, params: &ModelParameters, vocabulary: &Vocabulary) -> Result<()> {
    model_container(params, vocabulary_hash(vocabulary)).write(path)
}

pub fn load_model(path: &Path) -> Result<StoredModel> {
    model_from_container(&Container::read(path)?)
}

fn string_tensors(prefix: &str, items: impl Iterator<Item = impl AsRef<str>>) -> [Tensor; 2] {
    let mut blob = Vec::new();
    let mut offsets = vec![0u64];
    for s in items {
        blob.extend_from_slice(s.as_ref().as_bytes());
        offsets.push(blob.len() as u64);
    }
    [
        Tensor::new(
            &format!("{prefix}.offsets"),
            vec![offsets.len() as u64],
            TensorData::U64(offsets),
        ),
        Tensor::new(
            &format!("{prefix}.bytes"),
            vec![blob.len() as u64],
            TensorData::U8(blob),
        ),
    ]
}

fn u64_data<'a>(c: &'a Container, name: &str) -> Result<&'a [u64]> {
    match &c.tensor(name)?.data {
        TensorData::U64(v) => Ok(v),
        _ => Err(Error::format(format!("tensor `{name}` is not u64"))),
    }
}

/// Checks that `offsets` is a valid partition of `0..len` into `count` pieces.
fn check_offsets(offsets: &[u64], count: usize, len: usize) -> Result<()> {
    let ok = offsets.len() == count + 1
        && offsets.first() == Some(&0)
        && offsets.last() == Some(&(len as u64))
        && offsets.windows(2).all(|w| w[0] <= w[1]);
    if ok {
        Ok(())
    } else {
        Err(Error::format("offset table is malformed"))
    }
}

fn read_strings(c: &Container, prefix: &str, count: usize) -> Result<Vec<String>> {
    let offsets = u64_data(c, &format!("{prefix}.offsets"))?;
    let blob = match &c.tensor(&format!("{prefix}.bytes"))?.data {
        TensorData::U8(v) => v,
        _ => return Err(Error::format(format!("tensor `{prefix}.bytes` is not u8"))),
    };
    check_offsets(offsets, count, blob.len())?;
    offsets
        .windows(2)
        .map(|w| {
            String::from_utf8(blob[w[0] as usize..w[1] as usize].to_vec())
                .map_err(|_| Error::format(format!("`{prefix}` holds invalid UTF-8")))
        })
        .collect()
}

pub fn store_container(store: &DocumentStore) -> Container {
    let vocab = store.vocabulary();
    let mut tokens = Vec::with_capacity(store.total_token_count() as usize);
    let mut token_offsets = vec![0u64];
    for d in store.documents() {
        tokens.extend_from_slice(&d.tokens);
        token_offsets.push(tokens.len() as u64);
    }
    let mut tensors = Vec::new();
    tensors.extend(string_tensors("vocabulary.terms", vocab.terms().iter()));
    tensors.push(Tensor::new(
        "vocabulary.collection_frequency",
        vec![vocab.len() as u64],
        TensorData::U64(vocab.collection_frequencies().to_vec()),
    ));
    tensors.push(Tensor::new(
        "vocabulary.document_frequency",
        vec![vocab.len() as u64],
        TensorData::U64(vocab.document_frequencies().to_vec()),
    ));
    tensors.extend(string_tensors(
        "documents.names",
        store.documents().iter().map(|d| d.external_name.as_str()),
    ));
    tensors.push(Tensor::new(
        "documents.token_offsets",
        vec![token_offsets.len() as u64],
        TensorData::U64(token_offsets),
    ));
    tensors.push(Tensor::new(
        "documents.tokens",
        vec![tokens.len() as u64],
        TensorData::U32(tokens),
    ));
    Container {
        kind: ContainerKind::Store,
        metadata: vec![
            ("format_version".into(), u64::from(FORMAT_VERSION)),
            ("vocabulary_size".into(), vocab.len() as u64),
            ("max_vocabulary".into(), vocab.max_size() as u64),
            ("num_documents".into(), store.len() as u64),
            ("total_tokens".into(), store.total_token_count()),
            ("vocabulary_hash".into(), vocabulary_hash(vocab)),
        ],
        tensors,
    }
}

pub fn store_from_container(c: &Container) -> Result<DocumentStore> {
    if c.kind != ContainerKind::Store {
        return Err(Error::format("container does not hold a document store"));
    }
    if c.meta("format_version")? != u64::from(FORMAT_VERSION) {
        return Err(Error::format("store metadata has an unsupported version"));
    }
    let v = as_usize(c.meta("vocabulary_size")?)?;
    let n_docs = as_usize(c.meta("num_documents")?)?;
    let terms = read_strings(c, "vocabulary.terms", v)?;
    let cf = u64_data(c, "vocabulary.collection_frequency")?.to_vec();
    let df = u64_data(c, "vocabulary.document_frequency")?.to_vec();
    let vocabulary = Vocabulary::from_parts(terms, cf, df, as_usize(c.meta("max_vocabulary")?)?)?;
    if vocabulary_hash(&vocabulary) != c.meta("vocabulary_hash")? {
        return Err(Error::format("vocabulary hash mismatch"));
    }
    let names = read_strings(c, "documents.names", n_docs)?;
    let tokens = match &c.tensor("documents.tokens")?.data {
        TensorData::U32(v) => v,
        _ => return Err(Error::format("tensor `documents.tokens` is not u32")),
    };
    let offsets = u64_data(c, "documents.token_offsets")?;
    check_offsets(offsets, n_docs, tokens.len())?;
    let docs = names
        .into_iter()
        .zip(offsets.windows(2))
        .map(|(name, w)| (name, tokens[w[0] as usize..w[1] as usize].to_vec()))
        .collect();
    let store = DocumentStore::from_parts(vocabulary, docs)?;
    if store.total_token_count() != c.meta("total_tokens")? {
        return Err(Error::format("token count mismatch"));
    }
    Ok(store)
}

pub fn save_store(path: &Path, store: &DocumentStore) -> Result<()> {
    store_container(store).write(path)
}

pub fn load_store(path: &Path) -> Result<DocumentStore> {
    store_from_container(&Container::read(path)?)
}
