use std::collections::{HashMap, VecDeque};
use std::path::Path;

use super::{read_to_string, IngestError};

/// A rooted word hierarchy. The root has depth 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Taxonomy {
    index: HashMap<String, usize>,
    words: Vec<String>,
    parent: Vec<Option<usize>>,
    depth: Vec<u32>,
    root: usize,
}

impl Taxonomy {
    pub fn root(&self) -> &str {
        &self.words[self.root]
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(&word.to_lowercase())
    }

    pub fn depth(&self, word: &str) -> Option<u32> {
        self.index.get(&word.to_lowercase()).map(|&i| self.depth[i])
    }

    pub fn parent(&self, word: &str) -> Option<&str> {
        let i = *self.index.get(&word.to_lowercase())?;
        self.parent[i].map(|p| self.words[p].as_str())
    }

    /// Deepest common ancestor of two words (a word subsumes itself).
    pub fn lowest_common_subsumer(&self, a: &str, b: &str) -> Option<&str> {
        let mut ia = *self.index.get(&a.to_lowercase())?;
        let mut ib = *self.index.get(&b.to_lowercase())?;
        while self.depth[ia] > self.depth[ib] {
            ia = self.parent[ia]?;
        }
        while self.depth[ib] > self.depth[ia] {
            ib = self.parent[ib]?;
        }
        while ia != ib {
            ia = self.parent[ia]?;
            ib = self.parent[ib]?;
        }
        Some(&self.words[ia])
    }

    /// Words in breadth-first order from the root, children in insertion order.
    fn bfs(&self) -> Vec<usize> {
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); self.words.len()];
        for (c, p) in self.parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(c);
            }
        }
        let mut order = Vec::with_capacity(self.words.len());
        let mut queue = VecDeque::from([self.root]);
        while let Some(n) = queue.pop_front() {
            order.push(n);
            queue.extend(children[n].iter().copied());
        }
        order
    }
}

pub fn parse_taxonomy(path: impl AsRef<Path>) -> Result<Taxonomy, IngestError> {
    parse_taxonomy_str(&read_to_string(path.as_ref())?)
}

/// Parses `parent child` edge lines. A line with a single word declares it
/// without a parent; `#` starts a comment.
pub fn parse_taxonomy_str(text: &str) -> Result<Taxonomy, IngestError> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut words: Vec<String> = Vec::new();
    let mut parent: Vec<Option<usize>> = Vec::new();

    let mut intern = |w: &str, words: &mut Vec<String>, parent: &mut Vec<Option<usize>>| -> usize {
        let w = w.to_lowercase();
        *index.entry(w.clone()).or_insert_with(|| {
            words.push(w);
            parent.push(None);
            words.len() - 1
        })
    };

    for (i, raw) in text.lines().enumerate() {
        let line = (i + 1) as u64;
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match tokens.as_slice() {
            [] => {}
            [w] => {
                intern(w, &mut words, &mut parent);
            }
            [p, c] => {
                let pi = intern(p, &mut words, &mut parent);
                let ci = intern(c, &mut words, &mut parent);
                match parent[ci] {
                    Some(existing) if existing != pi => {
                        return Err(IngestError::ConflictingParent {
                            line,
                            word: words[ci].clone(),
                            existing: words[existing].clone(),
                        })
                    }
                    _ => parent[ci] = Some(pi),
                }
            }
            _ => {
                return Err(IngestError::MalformedRecord {
                    line,
                    reason: format!("expected 'parent child', got {} tokens", tokens.len()),
                })
            }
        }
    }
    if words.is_empty() {
        return Err(IngestError::EmptyFile);
    }

    // Every word has at most one parent, so a cycle shows up as a parent
    // chain longer than the vocabulary.
    for start in 0..words.len() {
        let mut cur = start;
        let mut steps = 0;
        while let Some(p) = parent[cur] {
            cur = p;
            steps += 1;
            if steps > words.len() {
                return Err(IngestError::CycleDetected(words[start].clone()));
            }
        }
    }

    let roots: Vec<usize> = (0..words.len()).filter(|&i| parent[i].is_none()).collect();
    if roots.len() > 1 {
        return Err(IngestError::MultipleRoots(roots.iter().map(|&i| words[i].clone()).collect()));
    }
    let root = roots[0];

    let mut depth = vec![0u32; words.len()];
    for i in 0..words.len() {
        let mut chain = Vec::new();
        let mut cur = i;
        while depth[cur] == 0 {
            chain.push(cur);
            match parent[cur] {
                Some(p) => cur = p,
                None => break,
            }
        }
        let mut d = if depth[cur] == 0 { 0 } else { depth[cur] };
        for &n in chain.iter().rev() {
            d += 1;
            depth[n] = d;
        }
    }

    let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    Ok(Taxonomy { index, words, parent, depth, root })
}

pub fn serialize_taxonomy(tax: &Taxonomy) -> String {
    let order = tax.bfs();
    if order.len() == 1 {
        return format!("{}\n", tax.words[tax.root]);
    }
    let mut out = String::new();
    for n in order {
        if let Some(p) = tax.parent[n] {
            out.push_str(&format!("{} {}\n", tax.words[p], tax.words[n]));
        }
    }
    out
}
