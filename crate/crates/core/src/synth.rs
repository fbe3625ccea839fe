//! Synthetic ground truth: spreader networks, cascades, price series and
//! message texts that the extraction rules can parse.
//!
//! Masterminds root disjoint communities. Each community is a random tree
//! grown from its mastermind plus a few extra forward edges. Events spread
//! as independent cascades with exponential delays.

use std::collections::{BTreeMap, BinaryHeap};
use std::cmp::Reverse;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::events::CrowdPumpEvent;
use crate::ingest::{CrowdPumpMessage, Direction, RawMessage};
use crate::market::{self, PricePoint, PriceSeries, ReturnRule};

pub const BAR: Duration = Duration::minutes(5);
const QUOTE: &str = "USDT";

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synth config: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_spreaders: usize,
    pub n_masterminds: usize,
    /// Events per coin.
    pub n_events: usize,
    pub n_coins: usize,
    pub forward_prob: f64,
    /// Chance that an accomplice gets a second in-edge inside its community.
    pub extra_edge_prob: f64,
    pub mean_delay_secs: f64,
    pub event_spacing_hours: f64,
    pub targets_per_message: usize,
    /// Share of announced targets the market reaches.
    pub hit_rate: f64,
    /// Peak of the post-announcement ramp relative to the pre-event price.
    pub ramp_return: f64,
    /// Per-bar drift and volatility of the log-price walk.
    pub price_drift: f64,
    pub volatility: f64,
    /// Chance per event of one unparseable chatter message.
    pub chatter_prob: f64,
    pub start: DateTime<Utc>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_spreaders: 40,
            n_masterminds: 4,
            n_events: 12,
            n_coins: 30,
            forward_prob: 0.6,
            extra_edge_prob: 0.1,
            mean_delay_secs: 3600.0,
            event_spacing_hours: 120.0,
            targets_per_message: 4,
            hit_rate: 0.5,
            ramp_return: 0.15,
            price_drift: 0.0,
            volatility: 0.001,
            chatter_prob: 0.1,
            start: DateTime::from_timestamp(1_672_531_200, 0).expect("valid epoch"),
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_masterminds == 0 || self.n_masterminds >= self.n_spreaders {
            out.push("need 0 < n_masterminds < n_spreaders".into());
        }
        if self.n_events == 0 || self.n_coins == 0 {
            out.push("n_events and n_coins must be positive".into());
        }
        if !(self.forward_prob > 0.0 && self.forward_prob <= 1.0) {
            out.push("forward_prob must lie in (0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.extra_edge_prob) || !(0.0..=1.0).contains(&self.chatter_prob) {
            out.push("extra_edge_prob and chatter_prob must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.hit_rate) {
            out.push("hit_rate must lie in [0, 1]".into());
        }
        if !(self.mean_delay_secs > 0.0) {
            out.push("mean_delay_secs must be positive".into());
        }
        if !(self.event_spacing_hours > 72.0) {
            out.push("event_spacing_hours must exceed the 72h gap cap".into());
        }
        if self.targets_per_message == 0 {
            out.push("targets_per_message must be positive".into());
        }
        if !(self.ramp_return >= 0.0 && self.volatility >= 0.0 && self.price_drift.is_finite()) {
            out.push("ramp_return and volatility must be nonnegative".into());
        }
        out
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(SynthError::Config(p))
        }
    }
}

// ---------------------------------------------------------------------------
// Network

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub nodes: Vec<String>,
    pub community: Vec<usize>,
    /// Directed `(from, to)` edges by node index, sorted.
    pub edges: Vec<(usize, usize)>,
    pub masterminds: Vec<usize>,
}

impl Network {
    pub fn labels(&self) -> Vec<u8> {
        let mut l = vec![0; self.nodes.len()];
        for &m in &self.masterminds {
            l[m] = 1;
        }
        l
    }

    pub fn out_neighbors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for &(a, b) in &self.edges {
            out[a].push(b);
        }
        out
    }

    pub fn edge_names(&self) -> Vec<(String, String)> {
        self.edges.iter().map(|&(a, b)| (self.nodes[a].clone(), self.nodes[b].clone())).collect()
    }
}

pub fn generate_network(cfg: &SynthConfig, rng: &mut impl Rng) -> Network {
    let n = cfg.n_spreaders;
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(rng);
    let nodes: Vec<String> = ids.iter().map(|i| format!("ch{i:03}")).collect();
    let masterminds: Vec<usize> = (0..cfg.n_masterminds).collect();
    let mut community = vec![0; n];
    let mut members: Vec<Vec<usize>> = masterminds.iter().map(|&m| vec![m]).collect();
    let mut edges = Vec::new();
    for v in cfg.n_masterminds..n {
        let c = (v - cfg.n_masterminds) % cfg.n_masterminds;
        community[v] = c;
        let earlier = &members[c];
        let parent = earlier[rng.random_range(0..earlier.len())];
        edges.push((parent, v));
        if earlier.len() > 1 && rng.random_bool(cfg.extra_edge_prob) {
            let other = earlier[rng.random_range(0..earlier.len())];
            if other != parent {
                edges.push((other, v));
            }
        }
        members[c].push(v);
    }
    for (c, &m) in masterminds.iter().enumerate() {
        community[m] = c;
    }
    edges.sort_unstable();
    Network { nodes, community, edges, masterminds }
}

// ---------------------------------------------------------------------------
// Cascades

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cascade {
    pub root: usize,
    /// `(node, time)` in arrival order.
    pub arrivals: Vec<(usize, DateTime<Utc>)>,
}

impl Cascade {
    pub fn start(&self) -> DateTime<Utc> {
        self.arrivals[0].1
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.arrivals[self.arrivals.len() - 1].1
    }
}

/// One independent cascade from `root`; every edge is sampled, in edge order.
pub fn spread(net: &Network, cfg: &SynthConfig, root: usize, start: DateTime<Utc>, rng: &mut impl Rng) -> Cascade {
    let exp = Exp::new(1.0 / cfg.mean_delay_secs).expect("positive rate");
    let mut live: Vec<Vec<(usize, i64)>> = vec![Vec::new(); net.nodes.len()];
    for &(a, b) in &net.edges {
        let ok = rng.random_bool(cfg.forward_prob);
        let delay = (exp.sample(rng).round() as i64).max(1);
        if ok {
            live[a].push((b, delay));
        }
    }
    let mut best: Vec<Option<i64>> = vec![None; net.nodes.len()];
    let mut heap = BinaryHeap::from([Reverse((0i64, root))]);
    best[root] = Some(0);
    let mut order = Vec::new();
    while let Some(Reverse((t, v))) = heap.pop() {
        if best[v] != Some(t) || order.iter().any(|&(u, _)| u == v) {
            continue;
        }
        order.push((v, t));
        for &(w, d) in &live[v] {
            if best[w].is_none_or(|bt| t + d < bt) {
                best[w] = Some(t + d);
                heap.push(Reverse((t + d, w)));
            }
        }
    }
    order.sort_by(|a, b| a.1.cmp(&b.1).then(net.nodes[a.0].cmp(&net.nodes[b.0])));
    Cascade { root, arrivals: order.into_iter().map(|(v, t)| (v, start + Duration::seconds(t))).collect() }
}

/// `count` cascades from uniformly drawn masterminds, spaced by the event spacing.
pub fn generate_cascades(net: &Network, cfg: &SynthConfig, first_start: DateTime<Utc>, count: usize, rng: &mut impl Rng) -> Vec<Cascade> {
    let spacing = Duration::seconds((cfg.event_spacing_hours * 3600.0) as i64);
    (0..count)
        .map(|k| {
            let root = net.masterminds[rng.random_range(0..net.masterminds.len())];
            let jitter = Duration::seconds(rng.random_range(0..6 * 3600));
            spread(net, cfg, root, first_start + spacing * k as i32 + jitter, rng)
        })
        .collect()
}

/// Cascades as extracted events, without prices or text.
pub fn cascade_events(net: &Network, cascades: &[Cascade], coin: &str) -> Vec<CrowdPumpEvent> {
    let mut pid = 0;
    cascades
        .iter()
        .enumerate()
        .map(|(k, c)| CrowdPumpEvent {
            event_id: k as u64 + 1,
            cryptocurrency: coin.to_string(),
            direction: Direction::Long,
            messages: c
                .arrivals
                .iter()
                .map(|&(v, t)| {
                    pid += 1;
                    CrowdPumpMessage {
                        pid,
                        entity_id: net.nodes[v].clone(),
                        trade_direction: Direction::Long,
                        source_datetime: t,
                        exchange: "Binance".into(),
                        cryptocurrency: coin.to_string(),
                        channel_participants: 0,
                        entry_prices: Vec::new(),
                        target_prices: Vec::new(),
                        stop_loss: None,
                        message_text: String::new(),
                    }
                })
                .collect(),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Prices

fn ramp_level(cascades: &[Cascade], t: DateTime<Utc>, peak: f64) -> f64 {
    let rise_end = Duration::hours(1);
    let decay = Duration::hours(12);
    cascades
        .iter()
        .map(|c| {
            let (s, top) = (c.start(), c.end() + rise_end);
            if t < s {
                0.0
            } else if t <= top {
                peak * (t - s).num_seconds() as f64 / (top - s).num_seconds() as f64
            } else if t <= top + decay {
                peak * (1.0 - (t - top).num_seconds() as f64 / decay.num_seconds() as f64)
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Geometric random walk on 5-minute bars with a ramp after each cascade
/// starts. Covers four days before the first and after the last arrival.
pub fn generate_prices(coin: &str, cascades: &[Cascade], cfg: &SynthConfig, base: f64, rng: &mut impl Rng) -> PriceSeries {
    let from = cascades.iter().map(Cascade::start).min().unwrap_or(cfg.start) - Duration::days(4);
    let to = cascades.iter().map(Cascade::end).max().unwrap_or(cfg.start) + Duration::days(4);
    let noise = Normal::new(cfg.price_drift, cfg.volatility).expect("finite volatility");
    let vol_noise = Normal::<f64>::new(0.0, 0.3).expect("constant");
    let from = DateTime::from_timestamp(from.timestamp() - from.timestamp().rem_euclid(BAR.num_seconds()), 0).expect("in range");
    let mut log_walk: f64 = 0.0;
    let mut points = Vec::new();
    let mut t = from;
    while t <= to {
        let level = ramp_level(cascades, t, cfg.ramp_return);
        let price = base * log_walk.exp() * (1.0 + level);
        let boost = if cfg.ramp_return > 0.0 { 4.0 * level / cfg.ramp_return } else { 0.0 };
        let volume = 1000.0 * vol_noise.sample(rng).exp() * (1.0 + boost);
        points.push(PricePoint { t, price, volume });
        log_walk += noise.sample(rng);
        t += BAR;
    }
    PriceSeries::new(format!("{coin}{QUOTE}"), points).expect("generated series is valid")
}

// ---------------------------------------------------------------------------
// Text

fn fmt_price(x: f64) -> String {
    format!("{x:.6}")
}

/// Targets such that exactly `achieved` lie at or below `extreme`.
pub fn place_targets(entry: f64, extreme: f64, achieved: usize, total: usize) -> Vec<f64> {
    let achieved = if extreme > entry { achieved.min(total) } else { 0 };
    let top = extreme.max(entry);
    (1..=total)
        .map(|j| {
            if j <= achieved {
                entry + (extreme - entry) * j as f64 / (achieved + 1) as f64
            } else {
                top * (1.0 + 0.03 * (j - achieved) as f64)
            }
        })
        .collect()
}

pub fn render_signal(coin: &str, entry: f64, targets: &[f64], stop: f64) -> String {
    let list: Vec<String> = targets.iter().map(|&t| fmt_price(t)).collect();
    format!(
        "#{coin}/{QUOTE} LONG\nExchange: Binance\nEntry: {}\nTargets: {}\nStop: {}",
        fmt_price(entry),
        list.join(" - "),
        fmt_price(stop)
    )
}

const CHATTER: [&str; 3] = ["Good morning traders!", "Market update coming soon, stay tuned.", "Thanks for the support, family."];

// ---------------------------------------------------------------------------
// Dataset

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub edges: Vec<(String, String)>,
    pub labels: BTreeMap<String, u8>,
    pub coins: Vec<String>,
    pub config: SynthConfig,
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub network: Network,
    pub cascades: BTreeMap<String, Vec<Cascade>>,
    pub raw: Vec<RawMessage>,
    pub prices: BTreeMap<String, PriceSeries>,
    pub truth: GroundTruth,
}

pub fn coin_name(k: usize) -> String {
    format!("SYN{k:02}")
}

/// Full dataset; coins occupy consecutive time blocks so a chronological
/// split separates them.
pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let network = generate_network(cfg, &mut rng);
    let participants: Vec<u64> = (0..cfg.n_spreaders).map(|_| rng.random_range(1_000..50_000)).collect();
    let block = Duration::seconds((cfg.event_spacing_hours * 3600.0) as i64) * cfg.n_events as i32;
    let mut cascades = BTreeMap::new();
    let mut prices = BTreeMap::new();
    let mut raw: Vec<(DateTime<Utc>, RawMessage)> = Vec::new();
    let coins: Vec<String> = (0..cfg.n_coins).map(coin_name).collect();
    for (k, coin) in coins.iter().enumerate() {
        let first = cfg.start + Duration::days(4) + block * k as i32;
        let cs = generate_cascades(&network, cfg, first, cfg.n_events, &mut rng);
        let base = rng.random_range(0.2..5.0);
        let series = generate_prices(coin, &cs, cfg, base, &mut rng);
        let hits = Binomial::new(cfg.targets_per_message as u64, cfg.hit_rate).expect("valid binomial");
        for c in &cs {
            for &(v, t) in &c.arrivals {
                let probe = cascade_probe(coin, t);
                let o = market::outcome(&series, &probe, ReturnRule::DirectionAware).expect("series covers every arrival");
                let achieved = hits.sample(&mut rng) as usize;
                let targets = place_targets(o.announcement_price, o.extreme_price, achieved, cfg.targets_per_message);
                let text = render_signal(coin, o.announcement_price, &targets, o.announcement_price * 0.92);
                raw.push((t, raw_message(&network.nodes[v], t, text, participants[v])));
            }
            if rng.random_bool(cfg.chatter_prob) {
                let v = rng.random_range(0..network.nodes.len());
                let t = c.start() + Duration::minutes(rng.random_range(1..120));
                let text = CHATTER[rng.random_range(0..CHATTER.len())].to_string();
                raw.push((t, raw_message(&network.nodes[v], t, text, participants[v])));
            }
        }
        prices.insert(coin.clone(), series);
        cascades.insert(coin.clone(), cs);
    }
    raw.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.channel_id.cmp(&b.1.channel_id)));
    let labels = network.labels();
    let truth = GroundTruth {
        edges: network.edge_names(),
        labels: network.nodes.iter().cloned().zip(labels).collect(),
        coins,
        config: cfg.clone(),
    };
    Ok(SynthDataset { network, cascades, raw: raw.into_iter().map(|(_, m)| m).collect(), prices, truth })
}

fn raw_message(channel: &str, t: DateTime<Utc>, text: String, participants: u64) -> RawMessage {
    RawMessage {
        channel_id: channel.to_string(),
        timestamp: t.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        text,
        channel_participants: participants,
    }
}

fn cascade_probe(coin: &str, t: DateTime<Utc>) -> CrowdPumpMessage {
    CrowdPumpMessage {
        pid: 0,
        entity_id: String::new(),
        trade_direction: Direction::Long,
        source_datetime: t,
        exchange: String::new(),
        cryptocurrency: coin.to_string(),
        channel_participants: 0,
        entry_prices: Vec::new(),
        target_prices: Vec::new(),
        stop_loss: None,
        message_text: String::new(),
    }
}

/// Output locations for [`write_dataset_to`].
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPaths {
    pub corpus: PathBuf,
    pub prices_dir: PathBuf,
    pub labels: PathBuf,
    pub ground_truth: PathBuf,
}

impl DatasetPaths {
    /// `corpus.jsonl`, `prices/`, `labels.csv` and `ground_truth.json` under `dir`.
    pub fn under(dir: &Path) -> Self {
        Self {
            corpus: dir.join("corpus.jsonl"),
            prices_dir: dir.join("prices"),
            labels: dir.join("labels.csv"),
            ground_truth: dir.join("ground_truth.json"),
        }
    }
}

pub fn write_dataset(dir: &Path, ds: &SynthDataset) -> Result<(), SynthError> {
    write_dataset_to(&DatasetPaths::under(dir), ds)
}

pub fn write_dataset_to(paths: &DatasetPaths, ds: &SynthDataset) -> Result<(), SynthError> {
    let io = |path: &Path, e: &dyn std::fmt::Display| SynthError::Io { path: path.display().to_string(), message: e.to_string() };
    for file in [&paths.corpus, &paths.labels, &paths.ground_truth] {
        if let Some(parent) = file.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| io(parent, &e))?;
        }
    }
    std::fs::create_dir_all(&paths.prices_dir).map_err(|e| io(&paths.prices_dir, &e))?;
    let mut text = String::new();
    for m in &ds.raw {
        text.push_str(&serde_json::to_string(m).expect("raw message serializes"));
        text.push('\n');
    }
    std::fs::write(&paths.corpus, text).map_err(|e| io(&paths.corpus, &e))?;
    for (coin, series) in &ds.prices {
        let path = paths.prices_dir.join(format!("{coin}.csv"));
        market::write_series(&path, series).map_err(|e| io(&path, &e))?;
    }
    let mut csv_text = String::from("entity_id,label\n");
    for (id, l) in &ds.truth.labels {
        csv_text.push_str(&format!("{id},{l}\n"));
    }
    std::fs::write(&paths.labels, csv_text).map_err(|e| io(&paths.labels, &e))?;
    let json = serde_json::to_string_pretty(&ds.truth).expect("ground truth serializes");
    std::fs::write(&paths.ground_truth, json + "\n").map_err(|e| io(&paths.ground_truth, &e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{classify_message, Extraction, RuleSet};

    fn small() -> SynthConfig {
        SynthConfig { n_spreaders: 20, n_masterminds: 2, n_events: 6, n_coins: 3, ..SynthConfig::default() }
    }

    #[test]
    fn labels_sum_to_masterminds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = generate_network(&small(), &mut rng);
        assert_eq!(net.labels().iter().map(|&l| l as usize).sum::<usize>(), 2);
        for &(a, b) in &net.edges {
            assert_eq!(net.community[a], net.community[b]);
            assert!(!net.masterminds.contains(&b));
        }
    }

    #[test]
    fn single_mastermind_is_a_rooted_tree() {
        let cfg = SynthConfig { n_masterminds: 1, extra_edge_prob: 0.0, ..small() };
        let net = generate_network(&cfg, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(net.edges.len(), cfg.n_spreaders - 1);
        let mut indeg = vec![0; cfg.n_spreaders];
        net.edges.iter().for_each(|&(_, b)| indeg[b] += 1);
        assert_eq!(indeg.iter().filter(|&&d| d == 0).count(), 1);
        assert_eq!(indeg[net.masterminds[0]], 0);
    }

    #[test]
    fn certain_forwarding_reaches_the_community_in_depth_order() {
        let cfg = SynthConfig { forward_prob: 1.0, extra_edge_prob: 0.0, ..small() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = generate_network(&cfg, &mut rng);
        let root = net.masterminds[0];
        let c = spread(&net, &cfg, root, cfg.start, &mut rng);
        let size = net.community.iter().filter(|&&k| k == net.community[root]).count();
        assert_eq!(c.arrivals.len(), size);
        let pos: BTreeMap<usize, usize> = c.arrivals.iter().enumerate().map(|(i, &(v, _))| (v, i)).collect();
        for &(a, b) in &net.edges {
            if let (Some(pa), Some(pb)) = (pos.get(&a), pos.get(&b)) {
                assert!(pa < pb);
            }
        }
    }

    #[test]
    fn tiny_forwarding_gives_singletons() {
        let cfg = SynthConfig { forward_prob: 1e-12, ..small() };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = generate_network(&cfg, &mut rng);
        let cs = generate_cascades(&net, &cfg, cfg.start, 20, &mut rng);
        assert!(cs.iter().all(|c| c.arrivals.len() == 1));
    }

    #[test]
    fn ramp_sets_max_return() {
        let cfg = SynthConfig { volatility: 0.0, ramp_return: 0.10, ..small() };
        let c = Cascade { root: 0, arrivals: vec![(0, cfg.start)] };
        let s = generate_prices("SYN00", &[c], &cfg, 2.0, &mut ChaCha8Rng::seed_from_u64(5));
        let o = market::outcome(&s, &cascade_probe("SYN00", cfg.start), ReturnRule::DirectionAware).unwrap();
        assert!((o.max_return - 0.10).abs() < 1e-9);

        let flat = SynthConfig { ramp_return: 0.0, ..cfg.clone() };
        let c = Cascade { root: 0, arrivals: vec![(0, cfg.start)] };
        let s = generate_prices("SYN00", &[c], &flat, 2.0, &mut ChaCha8Rng::seed_from_u64(5));
        let o = market::outcome(&s, &cascade_probe("SYN00", cfg.start), ReturnRule::DirectionAware).unwrap();
        assert_eq!(o.max_return, 0.0);
    }

    #[test]
    fn targets_straddle_the_extreme() {
        for a in 0..=4 {
            let t = place_targets(1.0, 1.2, a, 4);
            assert_eq!(t.iter().filter(|&&x| x <= 1.2).count(), a);
            assert!(t.windows(2).all(|w| w[0] < w[1]));
        }
        assert!(place_targets(1.0, 1.0, 3, 4).iter().all(|&x| x > 1.0));
    }

    #[test]
    fn every_signal_parses_back() {
        let ds = generate(&small()).unwrap();
        let rules = RuleSet::builtin();
        let mut parsed = 0;
        for (i, raw) in ds.raw.iter().enumerate() {
            match classify_message(rules, raw, i as u64 + 1, i + 1).unwrap() {
                Extraction::Message(m) => {
                    parsed += 1;
                    assert_eq!(m.target_prices.len(), 4, "{}", raw.text);
                    assert_eq!(m.trade_direction, Direction::Long);
                    assert!(m.cryptocurrency.starts_with("SYN"));
                }
                Extraction::Skipped(_) => assert!(CHATTER.contains(&raw.text.as_str())),
            }
        }
        let arrivals: usize = ds.cascades.values().flatten().map(|c| c.arrivals.len()).sum();
        assert_eq!(parsed, arrivals);
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = tempdir("a");
        let b = tempdir("b");
        write_dataset(&a, &generate(&small()).unwrap()).unwrap();
        write_dataset(&b, &generate(&small()).unwrap()).unwrap();
        for f in ["corpus.jsonl", "labels.csv", "ground_truth.json", "prices/SYN01.csv"] {
            assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
        }
    }

    fn tempdir(tag: &str) -> std::path::PathBuf {
        let d = std::env::temp_dir().join(format!("pumptrace-synth-{}-{tag}", std::process::id()));
        let _ = std::fs::remove_dir_all(&d);
        std::fs::create_dir_all(&d).unwrap();
        d
    }
}
