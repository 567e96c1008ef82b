use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_to_string, IngestError};
use crate::model::{CoordinateSet, LandUsageElement, LatLng, Tag, TagSet};

/// All known land-usage elements, keyed by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ElementStore {
    elements: BTreeMap<String, LandUsageElement>,
    dangling: Vec<(String, String)>,
}

impl ElementStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a store, failing on the first repeated id.
    pub fn from_elements(elements: impl IntoIterator<Item = LandUsageElement>) -> Result<Self, IngestError> {
        let mut map = BTreeMap::new();
        for e in elements {
            match map.entry(e.id.clone()) {
                Entry::Occupied(_) => return Err(IngestError::DuplicateId(e.id)),
                Entry::Vacant(v) => {
                    v.insert(e);
                }
            }
        }
        let mut store = Self { elements: map, dangling: Vec::new() };
        store.resolve_members();
        Ok(store)
    }

    fn resolve_members(&mut self) {
        let mut dangling = Vec::new();
        for e in self.elements.values() {
            for m in e.members.iter().flatten() {
                if !self.elements.contains_key(m) {
                    dangling.push((e.id.clone(), m.clone()));
                }
            }
        }
        if !dangling.is_empty() {
            log::warn!("{} member reference(s) do not resolve to a stored element", dangling.len());
        }
        self.dangling = dangling;
    }

    pub fn get(&self, id: &str) -> Option<&LandUsageElement> {
        self.elements.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &LandUsageElement> {
        self.elements.values()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// `(element id, member id)` pairs whose member is not in the store.
    pub fn dangling_members(&self) -> &[(String, String)] {
        &self.dangling
    }
}

#[derive(Serialize, Deserialize)]
struct RawStore {
    elements: Vec<RawElement>,
}

#[derive(Serialize, Deserialize)]
struct RawElement {
    id: String,
    #[serde(default)]
    tags: BTreeMap<String, String>,
    coordsets: Vec<RawCoordset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    members: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct RawCoordset {
    closed: bool,
    points: Vec<[f64; 2]>,
}

pub fn parse_land_usage(path: impl AsRef<Path>) -> Result<ElementStore, IngestError> {
    parse_land_usage_str(&read_to_string(path.as_ref())?)
}

pub fn parse_land_usage_str(text: &str) -> Result<ElementStore, IngestError> {
    let raw: RawStore = serde_json::from_str(text).map_err(IngestError::from_json)?;
    let mut elements = Vec::with_capacity(raw.elements.len());
    for re in raw.elements {
        let mut tags = TagSet::new();
        for (k, v) in &re.tags {
            let tag = Tag::new(k, v).map_err(|e| IngestError::MalformedRecord {
                line: 0,
                reason: format!("element {}: {e}", re.id),
            })?;
            tags.insert(tag);
        }
        let mut coordsets = Vec::with_capacity(re.coordsets.len());
        for rc in re.coordsets {
            let points = rc.points.into_iter().map(LatLng::from).collect();
            coordsets.push(CoordinateSet::new(points, rc.closed).map_err(|e| IngestError::geometry(&re.id, e))?);
        }
        let e = LandUsageElement::new(re.id.clone(), tags, coordsets, re.members)
            .map_err(|e| IngestError::geometry(&re.id, e))?;
        elements.push(e);
    }
    ElementStore::from_elements(elements)
}

/// Writes the store in the land-usage JSON format. Multi-valued tag keys
/// keep only their last value, since the format maps each key once.
pub fn serialize_land_usage(store: &ElementStore) -> String {
    let raw = RawStore {
        elements: store
            .iter()
            .map(|e| RawElement {
                id: e.id.clone(),
                tags: e.tags.iter().map(|t| (t.key().to_string(), t.value().to_string())).collect(),
                coordsets: e
                    .coordsets
                    .iter()
                    .map(|s| RawCoordset { closed: s.closed, points: s.points.iter().map(|p| [p.lat, p.lng]).collect() })
                    .collect(),
                members: e.members.clone(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("store serialises")
}
