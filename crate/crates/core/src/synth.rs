//! Deterministic synthetic data: a grid city, a person's daily routine
//! through it, and a taxonomy over the city's tag vocabulary.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::geo::METERS_PER_DEGREE;
use crate::ingest::{
    format_timestamp, parse_taxonomy_str, serialize_land_usage, serialize_trajectory_csv, ElementStore, IngestError,
    Taxonomy,
};
use crate::model::{CoordinateSet, LandUsageElement, LatLng, Tag, TagSet, Trajectory, TrajectoryPoint};

/// Parent/child edges covering every word the generator emits.
pub const SYNTH_TAXONOMY: &str = "\
entity structure
entity facility
entity route
entity area
entity cuisine
structure building
structure house
structure office
structure company
structure government
facility amenity
facility shop
amenity food
amenity education
food cafe
food restaurant
food pub
education school
education library
shop bakery
shop supermarket
shop clothes
shop convenience
route highway
route residential
route primary
area leisure
area park
area landuse
area commercial
area boundary
area administrative
cuisine coffee
cuisine italian
cuisine indian
cuisine pizza
";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// The city is `blocks` x `blocks` blocks.
    pub blocks: usize,
    pub block_pitch_m: f64,
    pub origin: LatLng,
    pub start_date: NaiveDate,
    pub days: usize,
    pub interval_s: i64,
    pub accuracy_mean_m: f64,
    pub accuracy_sd_m: f64,
    pub walk_speed_mps: f64,
    /// Expected number of signal dropouts per hour.
    pub gaps_per_hour: f64,
    pub gap_mean_min: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            blocks: 9,
            block_pitch_m: 150.0,
            origin: LatLng::new(52.38, -1.56),
            start_date: NaiveDate::from_ymd_opt(2020, 3, 2).expect("valid date"),
            days: 1,
            interval_s: 60,
            accuracy_mean_m: 12.0,
            accuracy_sd_m: 4.0,
            walk_speed_mps: 1.4,
            gaps_per_hour: 0.5,
            gap_mean_min: 6.0,
        }
    }
}

/// A ground-truth stay at one element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub element_id: String,
    pub begin: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

pub struct SynthData {
    pub store: ElementStore,
    pub trajectory: Trajectory,
    pub taxonomy: Taxonomy,
    pub visits: Vec<Visit>,
}

impl SynthData {
    /// Writes `trajectory.csv`, `land_usage.json`, `taxonomy.txt` and
    /// `visits.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), IngestError> {
        let write = |name: &str, body: String| {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|source| IngestError::Io { path: path.display().to_string(), source })
        };
        std::fs::create_dir_all(dir)
            .map_err(|source| IngestError::Io { path: dir.display().to_string(), source })?;
        write("trajectory.csv", serialize_trajectory_csv(&self.trajectory))?;
        write("land_usage.json", serialize_land_usage(&self.store))?;
        write("taxonomy.txt", SYNTH_TAXONOMY.to_string())?;
        write("visits.csv", write_visits_csv(&self.visits))
    }
}

pub fn write_visits_csv(visits: &[Visit]) -> String {
    let mut out = String::from("element_id,begin,end\n");
    for v in visits {
        writeln!(out, "{},{},{}", v.element_id, format_timestamp(&v.begin), format_timestamp(&v.end)).unwrap();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Home,
    Work,
    Food,
    Shop,
    Park,
    Other,
}

struct Venue {
    id: String,
    kind: Kind,
    /// Centre in local meters east/north of the origin.
    at: (f64, f64),
}

struct City {
    elements: Vec<LandUsageElement>,
    venues: Vec<Venue>,
}

/// Local meters to degrees around a fixed origin.
struct Frame {
    origin: LatLng,
    m_per_deg_lng: f64,
}

impl Frame {
    fn new(origin: LatLng) -> Self {
        Self { origin, m_per_deg_lng: METERS_PER_DEGREE * origin.lat.to_radians().cos() }
    }

    fn latlng(&self, x: f64, y: f64) -> LatLng {
        LatLng::new(self.origin.lat + y / METERS_PER_DEGREE, self.origin.lng + x / self.m_per_deg_lng)
    }

    fn rect(&self, x0: f64, y0: f64, w: f64, h: f64) -> CoordinateSet {
        CoordinateSet::polygon(vec![
            self.latlng(x0, y0),
            self.latlng(x0 + w, y0),
            self.latlng(x0 + w, y0 + h),
            self.latlng(x0, y0 + h),
        ])
        .expect("rectangle has four distinct corners")
    }
}

fn tags(pairs: &[(&str, &str)]) -> TagSet {
    pairs.iter().map(|(k, v)| Tag::new(k, v).expect("non-empty key")).collect()
}

const FOOD: [&[(&str, &str)]; 5] = [
    &[("amenity", "cafe"), ("cuisine", "coffee")],
    &[("amenity", "restaurant"), ("cuisine", "italian")],
    &[("amenity", "restaurant"), ("cuisine", "indian")],
    &[("amenity", "restaurant"), ("cuisine", "pizza")],
    &[("amenity", "pub")],
];
const SHOPS: [&[(&str, &str)]; 4] =
    [&[("shop", "bakery")], &[("shop", "supermarket")], &[("shop", "clothes")], &[("shop", "convenience")]];
const OTHER: [&[(&str, &str)]; 2] = [&[("amenity", "school")], &[("amenity", "library")]];

#[derive(Clone, Copy, PartialEq)]
enum Block {
    Residential,
    Office,
    Commercial,
    Park,
}

fn build_city(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> City {
    let frame = Frame::new(spec.origin);
    let n = spec.blocks;
    let pitch = spec.block_pitch_m;
    let extent = n as f64 * pitch;
    let mut elements = Vec::new();
    let mut venues = Vec::new();
    let mut next = 0usize;
    let mut id = || {
        next += 1;
        format!("w{next:04}")
    };

    for i in 0..=n {
        let c = i as f64 * pitch;
        let kind = if i == n / 2 { "primary" } else { "residential" };
        for (a, b) in [((c, 0.0), (c, extent)), ((0.0, c), (extent, c))] {
            let line = CoordinateSet::open(vec![frame.latlng(a.0, a.1), frame.latlng(b.0, b.1)]).expect("two points");
            elements.push(LandUsageElement::new(id(), tags(&[("highway", kind)]), vec![line], None).unwrap());
        }
    }

    let total = n * n;
    let mut layout = vec![Block::Residential; total];
    let offices = (total / 10).max(1);
    let commercial = (total / 8).max(1);
    for (k, slot) in layout.iter_mut().enumerate().skip(1) {
        *slot = if k <= offices {
            Block::Office
        } else if k <= offices + commercial {
            Block::Commercial
        } else {
            Block::Residential
        };
    }
    layout[0] = Block::Park;
    layout.shuffle(rng);

    let margin = 50.0;
    let city = frame.rect(-margin, -margin, extent + 2.0 * margin, extent + 2.0 * margin);
    elements.push(LandUsageElement::new(id(), tags(&[("boundary", "administrative")]), vec![city], None).unwrap());

    // landuse districts of up to 3 x 3 blocks, overlapping the buildings and roads inside
    let span = 3;
    for dy in (0..n).step_by(span) {
        for dx in (0..n).step_by(span) {
            let (w, h) = ((span.min(n - dx)) as f64 * pitch, (span.min(n - dy)) as f64 * pitch);
            let busy = (dy..(dy + span).min(n))
                .flat_map(|y| (dx..(dx + span).min(n)).map(move |x| y * n + x))
                .any(|k| matches!(layout[k], Block::Office | Block::Commercial));
            let value = if busy { "commercial" } else { "residential" };
            let area = frame.rect(dx as f64 * pitch, dy as f64 * pitch, w, h);
            elements.push(LandUsageElement::new(id(), tags(&[("landuse", value)]), vec![area], None).unwrap());
        }
    }

    let setback = 15.0;
    let inner = pitch - 2.0 * setback;
    for (k, block) in layout.iter().enumerate() {
        let (bx, by) = ((k % n) as f64 * pitch + setback, (k / n) as f64 * pitch + setback);
        let mut place = |x: f64, y: f64, w: f64, h: f64, t: TagSet, kind: Kind, elements: &mut Vec<LandUsageElement>| {
            let eid = id();
            elements.push(LandUsageElement::new(eid.clone(), t, vec![frame.rect(x, y, w, h)], None).unwrap());
            venues.push(Venue { id: eid, kind, at: (x + w / 2.0, y + h / 2.0) });
        };
        match block {
            Block::Park => place(bx, by, inner, inner, tags(&[("leisure", "park")]), Kind::Park, &mut elements),
            Block::Residential => {
                let side = 30.0;
                for (dx, dy) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
                    let (x, y) = (bx + 10.0 + dx * (inner - side - 20.0), by + 10.0 + dy * (inner - side - 20.0));
                    place(x, y, side, side, tags(&[("building", "house")]), Kind::Home, &mut elements);
                }
            }
            Block::Office => {
                let w = (inner - 20.0) / 2.0;
                for dx in [0.0, 1.0] {
                    let t = if rng.random_bool(0.8) { ("office", "company") } else { ("office", "government") };
                    place(bx + dx * (w + 20.0), by + 20.0, w, inner - 40.0, tags(&[("building", "office"), t]), Kind::Work, &mut elements);
                }
            }
            Block::Commercial => {
                let w = (inner - 30.0) / 3.0;
                for dx in 0..3 {
                    let roll: f64 = rng.random();
                    let (t, kind) = if roll < 0.45 {
                        (*FOOD.choose(rng).unwrap(), Kind::Food)
                    } else if roll < 0.85 {
                        (*SHOPS.choose(rng).unwrap(), Kind::Shop)
                    } else {
                        (*OTHER.choose(rng).unwrap(), Kind::Other)
                    };
                    let x = bx + dx as f64 * (w + 15.0);
                    place(x, by + inner / 2.0 - w / 2.0, w, w, tags(t), kind, &mut elements);
                }
            }
        }
    }
    City { elements, venues }
}

/// Where the person is between two instants: still, or walking a polyline.
enum Leg {
    Stay { at: (f64, f64) },
    Walk { path: Vec<(f64, f64)> },
}

struct Timeline {
    legs: Vec<(DateTime<Utc>, DateTime<Utc>, Leg)>,
}

impl Timeline {
    fn position(&self, t: DateTime<Utc>) -> (f64, f64) {
        let k = self.legs.partition_point(|(_, end, _)| *end < t).min(self.legs.len() - 1);
        let (begin, end, leg) = &self.legs[k];
        match leg {
            Leg::Stay { at } => *at,
            Leg::Walk { path } => {
                let span = (*end - *begin).num_milliseconds().max(1) as f64;
                let frac = ((t - *begin).num_milliseconds() as f64 / span).clamp(0.0, 1.0);
                along(path, frac)
            }
        }
    }
}

fn path_length(path: &[(f64, f64)]) -> f64 {
    path.windows(2).map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1)).sum()
}

fn along(path: &[(f64, f64)], frac: f64) -> (f64, f64) {
    let mut remaining = frac * path_length(path);
    for w in path.windows(2) {
        let seg = (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1);
        if remaining <= seg && seg > 0.0 {
            let f = remaining / seg;
            return (w[0].0 + f * (w[1].0 - w[0].0), w[0].1 + f * (w[1].1 - w[0].1));
        }
        remaining -= seg;
    }
    *path.last().expect("non-empty path")
}

/// Street route: out to the nearest east-west road, along it to the
/// target's nearest north-south road, then in.
fn route(a: (f64, f64), b: (f64, f64), pitch: f64) -> Vec<(f64, f64)> {
    let snap = |v: f64| (v / pitch).round() * pitch;
    let (ya, xb, yb) = (snap(a.1), snap(b.0), snap(b.1));
    vec![a, (a.0, ya), (xb, ya), (xb, yb), (b.0, yb), b]
}

struct Planner<'a> {
    spec: &'a SynthSpec,
    legs: Vec<(DateTime<Utc>, DateTime<Utc>, Leg)>,
    visits: Vec<Visit>,
    now: DateTime<Utc>,
    here: (f64, f64),
}

impl Planner<'_> {
    fn stay_until(&mut self, venue: &Venue, until: DateTime<Utc>) {
        let until = until.max(self.now + Duration::minutes(5));
        self.legs.push((self.now, until, Leg::Stay { at: venue.at }));
        self.visits.push(Visit { element_id: venue.id.clone(), begin: self.now, end: until });
        self.now = until;
    }

    fn walk_to(&mut self, venue: &Venue) {
        let path = route(self.here, venue.at, self.spec.block_pitch_m);
        let secs = (path_length(&path) / self.spec.walk_speed_mps).round() as i64;
        let arrive = self.now + Duration::seconds(secs.max(1));
        self.legs.push((self.now, arrive, Leg::Walk { path }));
        self.now = arrive;
        self.here = venue.at;
    }
}

fn jitter(rng: &mut ChaCha8Rng, minutes: i64) -> Duration {
    Duration::minutes(rng.random_range(-minutes..=minutes))
}

/// Generates the city, a `spec.days`-day routine and its ground truth.
/// Output depends only on `seed` and `spec`.
pub fn synth(seed: u64, spec: &SynthSpec) -> SynthData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let city = build_city(spec, &mut rng);
    let of_kind = |k: Kind| city.venues.iter().filter(|v| v.kind == k).collect::<Vec<_>>();
    let home = *of_kind(Kind::Home).choose(&mut rng).expect("houses exist");
    let work = *of_kind(Kind::Work).choose(&mut rng).expect("offices exist");
    let lunch: Vec<&Venue> = of_kind(Kind::Food).choose_multiple(&mut rng, 3).copied().collect();
    let shops: Vec<&Venue> = of_kind(Kind::Shop).choose_multiple(&mut rng, 2).copied().collect();
    let park = of_kind(Kind::Park);
    let novel: Vec<&Venue> = city.venues.iter().filter(|v| matches!(v.kind, Kind::Food | Kind::Shop | Kind::Other)).collect();

    let start = spec.start_date.and_hms_opt(0, 0, 0).expect("midnight").and_utc();
    let mut plan = Planner { spec, legs: Vec::new(), visits: Vec::new(), now: start, here: home.at };
    for day in 0..spec.days {
        let midnight = start + Duration::days(day as i64);
        let at = |h: i64, m: i64| midnight + Duration::hours(h) + Duration::minutes(m);
        plan.stay_until(home, at(8, 30) + jitter(&mut rng, 10));
        plan.walk_to(work);
        plan.stay_until(work, at(12, 0) + jitter(&mut rng, 10));
        if let Some(food) = lunch.choose(&mut rng) {
            plan.walk_to(food);
            let until = plan.now + Duration::minutes(40) + jitter(&mut rng, 10);
            plan.stay_until(food, until);
            plan.walk_to(work);
        }
        plan.stay_until(work, at(17, 30) + jitter(&mut rng, 15));
        if rng.random_bool(0.7) {
            if let Some(shop) = shops.choose(&mut rng) {
                plan.walk_to(shop);
                let until = plan.now + Duration::minutes(20) + jitter(&mut rng, 5);
                plan.stay_until(shop, until);
            }
        }
        if rng.random_bool(0.4) {
            if let Some(p) = park.first() {
                plan.walk_to(p);
                let until = plan.now + Duration::minutes(45) + jitter(&mut rng, 10);
                plan.stay_until(p, until);
            }
        }
        if rng.random_bool(0.2) {
            if let Some(v) = novel.choose(&mut rng) {
                plan.walk_to(v);
                let until = plan.now + Duration::minutes(30) + jitter(&mut rng, 10);
                plan.stay_until(v, until);
            }
        }
        plan.walk_to(home);
    }
    let end = start + Duration::days(spec.days as i64);
    plan.stay_until(home, end);

    let timeline = Timeline { legs: plan.legs };
    let frame = Frame::new(spec.origin);
    let accuracy = Normal::new(spec.accuracy_mean_m, spec.accuracy_sd_m).expect("finite spread");
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let steps = (end - start).num_seconds() / spec.interval_s;
    let gap_start = (spec.gaps_per_hour * spec.interval_s as f64 / 3600.0).clamp(0.0, 1.0);
    let gap_len = Exp::new(1.0 / (spec.gap_mean_min * 60.0).max(1.0)).expect("positive rate");
    let mut resume = start;
    let mut points = Vec::with_capacity(steps as usize);
    for k in 0..steps {
        let t = start + Duration::seconds(k * spec.interval_s);
        if t < resume {
            continue;
        }
        if rng.random_bool(gap_start) {
            resume = t + Duration::seconds(gap_len.sample(&mut rng).round() as i64);
            continue;
        }
        let (x, y) = timeline.position(t);
        let acc = accuracy.sample(&mut rng).clamp(3.0, 60.0);
        let (nx, ny) = (unit.sample(&mut rng) * acc / 2.0, unit.sample(&mut rng) * acc / 2.0);
        let p = frame.latlng(x + nx, y + ny);
        points.push(TrajectoryPoint::new(t, p.lat, p.lng, acc).expect("generated point in range"));
    }

    let mut visits = plan.visits;
    visits.retain(|v| v.end > v.begin);
    SynthData {
        store: ElementStore::from_elements(city.elements).expect("generated ids are unique"),
        trajectory: Trajectory::from_points(points),
        taxonomy: parse_taxonomy_str(SYNTH_TAXONOMY).expect("built-in taxonomy parses"),
        visits,
    }
}

/// Distinct element ids in the ground-truth log.
pub fn visited_ids(visits: &[Visit]) -> BTreeSet<&str> {
    visits.iter().map(|v| v.element_id.as_str()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_land_usage_str, parse_trajectory_str, DEFAULT_ACCURACY_M};

    #[test]
    fn same_seed_same_output() {
        let spec = SynthSpec::default();
        let (a, b) = (synth(7, &spec), synth(7, &spec));
        assert_eq!(serialize_trajectory_csv(&a.trajectory), serialize_trajectory_csv(&b.trajectory));
        assert_eq!(serialize_land_usage(&a.store), serialize_land_usage(&b.store));
        assert_eq!(a.visits, b.visits);
        let c = synth(8, &spec);
        assert_ne!(serialize_trajectory_csv(&a.trajectory), serialize_trajectory_csv(&c.trajectory));
    }

    #[test]
    fn sizes_and_round_trip() {
        let data = synth(1, &SynthSpec::default());
        assert!((250..=350).contains(&data.store.len()), "{} elements", data.store.len());
        assert!((1300..=1440).contains(&data.trajectory.len()), "{} points", data.trajectory.len());
        let text = serialize_land_usage(&data.store);
        assert_eq!(parse_land_usage_str(&text).unwrap().len(), data.store.len());
        let traj = parse_trajectory_str(&serialize_trajectory_csv(&data.trajectory), DEFAULT_ACCURACY_M).unwrap();
        assert_eq!(traj.len(), data.trajectory.len());
        for v in &data.visits {
            assert!(data.store.get(&v.element_id).is_some());
        }
    }

    #[test]
    fn taxonomy_covers_vocabulary() {
        let data = synth(3, &SynthSpec::default());
        for e in data.store.iter() {
            for t in &e.tags {
                for word in [t.key(), t.value()] {
                    assert!(data.taxonomy.contains(word), "{word} missing");
                }
            }
        }
    }

    #[test]
    fn routine_is_contiguous() {
        let spec = SynthSpec { days: 3, ..Default::default() };
        let data = synth(5, &spec);
        assert!(data.trajectory.len() > 3 * 1300);
        let gapless = synth(5, &SynthSpec { gaps_per_hour: 0.0, ..spec });
        assert_eq!(gapless.trajectory.len(), 3 * 1440);
        for w in data.visits.windows(2) {
            assert!(w[0].end <= w[1].begin);
        }
        let days: BTreeSet<_> = data.visits.iter().map(|v| v.begin.date_naive()).collect();
        assert_eq!(days.len(), 3);
    }

    #[test]
    fn route_runs_along_streets() {
        let r = route((20.0, 40.0), (400.0, 260.0), 150.0);
        assert_eq!(r[1], (20.0, 0.0));
        assert_eq!(r[2], (450.0, 0.0));
        assert_eq!(r[3], (450.0, 300.0));
        assert_eq!(along(&r, 0.0), (20.0, 40.0));
        assert_eq!(along(&r, 1.0), (400.0, 260.0));
    }
}
