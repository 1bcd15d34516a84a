//! Groups sensor companies into at most `N` virtual entities so that members
//! of an entity sit close together, subject to a per-entity valuation cap.
//!
//! An entity's compatibility is the negative mean pairwise distance of its
//! members (0 for singletons and empty entities); the objective is the sum
//! over entities. Small instances are solved exactly by enumerating set
//! partitions. Larger ones go through a continuous relaxation (projected
//! gradient ascent over per-company simplices), greedy rounding with a
//! capacity repair, and a move/swap local search on the true objective.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};
use crate::money::Money;

/// Largest `N^M` solved by enumeration.
pub const EXHAUSTIVE_LIMIT: u64 = 1_000_000;

const OBJ_TOLERANCE: f64 = 1e-9;

/// Largest union of two entities that is re-split exhaustively.
const REPARTITION_LIMIT: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanySite {
    pub id: String,
    #[serde(rename = "valuation_cents")]
    pub valuation: Money,
    pub x_m: f64,
    pub y_m: f64,
}

impl CompanySite {
    pub fn new(id: impl Into<String>, valuation: Money, x_m: f64, y_m: f64) -> Self {
        Self { id: id.into(), valuation, x_m, y_m }
    }

    pub fn distance_to(&self, other: &CompanySite) -> f64 {
        (self.x_m - other.x_m).hypot(self.y_m - other.y_m)
    }
}

/// `−(mean pairwise Euclidean distance)`; a lone member scores 0.
pub fn compatibility_score(members: &[CompanySite]) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::validation("members", "compatibility of an empty set is undefined"));
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for (i, a) in members.iter().enumerate() {
        for b in &members[i + 1..] {
            sum += a.distance_to(b);
            pairs += 1;
        }
    }
    Ok(if pairs == 0 { 0.0 } else { -sum / pairs as f64 })
}

/// Instance file layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub companies: Vec<CompanySite>,
    #[serde(rename = "N")]
    pub entities: usize,
    #[serde(rename = "T_cents")]
    pub threshold: Money,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "min_valuation_cents")]
    pub min_valuation: Option<Money>,
    /// Optional replacement for Euclidean distances, indexed like `companies`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairwise_distances: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioProblem {
    companies: Vec<CompanySite>,
    entities: usize,
    threshold: Money,
    min_valuation: Option<Money>,
    distances: Vec<Vec<f64>>,
}

impl PortfolioProblem {
    pub fn new(companies: Vec<CompanySite>, entities: usize, threshold: Money) -> Result<Self> {
        Self::from_instance(InstanceFile {
            companies,
            entities,
            threshold,
            min_valuation: None,
            pairwise_distances: None,
        })
    }

    pub fn from_instance(instance: InstanceFile) -> Result<Self> {
        let InstanceFile { companies, entities, threshold, min_valuation, pairwise_distances } = instance;
        let mut errors = Vec::new();
        if companies.is_empty() {
            errors.push(FieldError::new("companies", "at least one company is required"));
        }
        if entities < 1 {
            errors.push(FieldError::new("N", "must be at least 1"));
        }
        let mut seen = BTreeSet::new();
        for (i, c) in companies.iter().enumerate() {
            if !c.valuation.is_positive() {
                errors.push(FieldError::new(format!("companies[{i}].valuation_cents"), "must be positive"));
            }
            if !(c.x_m.is_finite() && c.y_m.is_finite()) {
                errors.push(FieldError::new(format!("companies[{i}]"), "coordinates must be finite"));
            }
            if !seen.insert(c.id.as_str()) {
                errors.push(FieldError::new(format!("companies[{i}].id"), format!("duplicate id {:?}", c.id)));
            }
        }
        let m = companies.len();
        let distances = match pairwise_distances {
            Some(d) => {
                let square = d.len() == m && d.iter().all(|row| row.len() == m);
                if !square {
                    errors.push(FieldError::new("pairwise_distances", format!("must be a {m}x{m} matrix")));
                } else if d.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
                    errors.push(FieldError::new("pairwise_distances", "entries must be finite and non-negative"));
                }
                d
            }
            None => companies.iter().map(|a| companies.iter().map(|b| a.distance_to(b)).collect()).collect(),
        };
        if !errors.is_empty() {
            return Err(Error::Validation(errors));
        }
        if let Some(c) = companies.iter().find(|c| c.valuation > threshold) {
            return Err(Error::Infeasible(format!(
                "company {} (valuation {}) exceeds the per-entity threshold {}",
                c.id, c.valuation, threshold
            )));
        }
        Ok(Self { companies, entities, threshold, min_valuation, distances })
    }

    pub fn companies(&self) -> &[CompanySite] {
        &self.companies
    }

    pub fn entities(&self) -> usize {
        self.entities
    }

    pub fn threshold(&self) -> Money {
        self.threshold
    }

    /// `N^M` as a float, since it overflows quickly.
    pub fn search_space(&self) -> f64 {
        (self.entities as f64).powi(self.companies.len() as i32)
    }

    pub fn is_exhaustive(&self) -> bool {
        self.search_space() <= EXHAUSTIVE_LIMIT as f64
    }

    fn score_block(&self, members: &[usize]) -> f64 {
        let mut sum = 0.0;
        let mut pairs = 0usize;
        for (a, &i) in members.iter().enumerate() {
            for &k in &members[a + 1..] {
                sum += self.distances[i][k];
                pairs += 1;
            }
        }
        if pairs == 0 {
            0.0
        } else {
            -sum / pairs as f64
        }
    }

    /// Per-entity scores for an assignment vector (0-based entity per company).
    pub fn entity_scores(&self, entity_of: &[usize]) -> Vec<f64> {
        let mut blocks = vec![Vec::new(); self.entities];
        for (i, &j) in entity_of.iter().enumerate() {
            blocks[j].push(i);
        }
        blocks.iter().map(|b| self.score_block(b)).collect()
    }

    pub fn objective(&self, entity_of: &[usize]) -> f64 {
        self.entity_scores(entity_of).iter().sum()
    }

    fn loads(&self, entity_of: &[usize]) -> Vec<Money> {
        let mut loads = vec![Money::ZERO; self.entities];
        for (i, &j) in entity_of.iter().enumerate() {
            loads[j] += self.companies[i].valuation;
        }
        loads
    }

    fn violates_floor(&self, load: Money) -> bool {
        matches!(self.min_valuation, Some(floor) if load.is_positive() && load < floor)
    }

    /// Checks totality and per-entity bounds.
    pub fn check_feasible(&self, entity_of: &[usize]) -> Result<()> {
        if entity_of.len() != self.companies.len() || entity_of.iter().any(|&j| j >= self.entities) {
            return Err(Error::Infeasible("every company must map to exactly one entity".into()));
        }
        for (j, load) in self.loads(entity_of).into_iter().enumerate() {
            if load > self.threshold {
                return Err(Error::Infeasible(format!(
                    "entity {} holds {} > threshold {}",
                    j + 1,
                    load,
                    self.threshold
                )));
            }
            if self.violates_floor(load) {
                return Err(Error::Infeasible(format!("entity {} holds {} below the valuation floor", j + 1, load)));
            }
        }
        Ok(())
    }

    fn assignment(&self, entity_of: Vec<usize>, method: SolveMethod) -> VirtualAssignment {
        let entity_scores = self.entity_scores(&entity_of);
        let objective = entity_scores.iter().sum();
        VirtualAssignment {
            entity_of,
            entity_scores,
            objective,
            method,
            ids: self.companies.iter().map(|c| c.id.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Exhaustive,
    Relaxation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VirtualAssignment {
    entity_of: Vec<usize>,
    pub entity_scores: Vec<f64>,
    pub objective: f64,
    pub method: SolveMethod,
    ids: Vec<String>,
}

impl VirtualAssignment {
    /// 0-based entity index per company, in instance order.
    pub fn entity_of(&self) -> &[usize] {
        &self.entity_of
    }

    pub fn nonempty_entities(&self) -> usize {
        self.entity_of.iter().collect::<BTreeSet<_>>().len()
    }

    /// Company id → 1-based entity number.
    pub fn by_company(&self) -> BTreeMap<String, usize> {
        self.ids.iter().cloned().zip(self.entity_of.iter().map(|j| j + 1)).collect()
    }
}

#[derive(Serialize)]
struct AssignmentJson<'a> {
    method: SolveMethod,
    objective: f64,
    entity_scores: &'a [f64],
    assignment: BTreeMap<String, usize>,
}

impl Serialize for VirtualAssignment {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        AssignmentJson {
            method: self.method,
            objective: self.objective,
            entity_scores: &self.entity_scores,
            assignment: self.by_company(),
        }
        .serialize(serializer)
    }
}

/// True when `cand` beats `best` under: higher objective, then fewer
/// non-empty entities. Lexicographic order is left to the caller's
/// enumeration order.
fn better(cand: (f64, usize), best: Option<(f64, usize)>) -> bool {
    match best {
        None => true,
        Some((obj, used)) => cand.0 > obj + OBJ_TOLERANCE || ((cand.0 - obj).abs() <= OBJ_TOLERANCE && cand.1 < used),
    }
}

struct Enumerator<'a> {
    problem: &'a PortfolioProblem,
    entity_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    loads: Vec<Money>,
    dist_sums: Vec<f64>,
    best: Option<(f64, usize, Vec<usize>)>,
}

impl Enumerator<'_> {
    fn leaf(&mut self, used: usize) {
        if (0..used).any(|j| self.problem.violates_floor(self.loads[j])) {
            return;
        }
        let objective: f64 = (0..used)
            .map(|j| {
                let n = self.members[j].len();
                if n < 2 {
                    0.0
                } else {
                    -self.dist_sums[j] / (n * (n - 1) / 2) as f64
                }
            })
            .sum();
        if better((objective, used), self.best.as_ref().map(|b| (b.0, b.1))) {
            self.best = Some((objective, used, self.entity_of.clone()));
        }
    }

    // Restricted growth strings: company i may join any used block or open
    // the next one. Every labelled assignment is a relabelling of exactly
    // one of these, and each is the lexicographically least of its class.
    fn descend(&mut self, i: usize, used: usize) {
        let p = self.problem;
        if i == p.companies.len() {
            self.leaf(used);
            return;
        }
        let v = p.companies[i].valuation;
        let open = (used + 1).min(p.entities);
        for j in 0..open {
            if self.loads[j] + v > p.threshold {
                continue;
            }
            let added: f64 = self.members[j].iter().map(|&k| p.distances[i][k]).sum();
            self.entity_of[i] = j;
            self.members[j].push(i);
            self.loads[j] += v;
            self.dist_sums[j] += added;
            self.descend(i + 1, used.max(j + 1));
            self.dist_sums[j] -= added;
            self.loads[j] -= v;
            self.members[j].pop();
        }
    }
}

/// Exact optimum by enumeration. Ties go to fewer non-empty entities, then
/// to the lexicographically smallest assignment vector.
pub fn brute_force_portfolio(problem: &PortfolioProblem) -> Result<VirtualAssignment> {
    if !problem.is_exhaustive() {
        return Err(Error::InstanceTooLarge { assignments: problem.search_space(), limit: EXHAUSTIVE_LIMIT });
    }
    let n = problem.entities;
    let mut e = Enumerator {
        problem,
        entity_of: vec![0; problem.companies.len()],
        members: vec![Vec::new(); n],
        loads: vec![Money::ZERO; n],
        dist_sums: vec![0.0; n],
        best: None,
    };
    e.descend(0, 0);
    match e.best {
        Some((_, _, entity_of)) => Ok(problem.assignment(entity_of, SolveMethod::Exhaustive)),
        None => Err(Error::Infeasible(format!(
            "no assignment of {} companies into {} entities respects the threshold {}",
            problem.companies.len(),
            n,
            problem.threshold
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Use the relaxation path even when enumeration would be cheap.
    pub force_heuristic: bool,
    pub seed: u64,
    pub restarts: usize,
    pub iterations: usize,
    pub step: f64,
    /// Random perturbations tried after each restart's descent.
    pub kicks: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { force_heuristic: false, seed: 0, restarts: 8, iterations: 300, step: 0.05, kicks: 200 }
    }
}

pub fn optimize_portfolio(problem: &PortfolioProblem, options: &SolveOptions) -> Result<VirtualAssignment> {
    let result = if !options.force_heuristic && problem.is_exhaustive() {
        brute_force_portfolio(problem)?
    } else {
        relax_and_round(problem, options)?
    };
    problem.check_feasible(result.entity_of())?;
    Ok(result)
}

fn relax_and_round(problem: &PortfolioProblem, options: &SolveOptions) -> Result<VirtualAssignment> {
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    let mut last_err = None;
    for r in 0..options.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_add(r as u64));
        let weights = relax(problem, &mut rng, options);
        let rounded = round(problem, &weights).or_else(|_| pack(problem, &weights));
        let entity_of = match rounded.and_then(|a| repair_floor(problem, &weights, a)) {
            Ok(a) => perturb_and_descend(problem, a, &mut rng, options.kicks),
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let objective = problem.objective(&entity_of);
        let used = entity_of.iter().collect::<BTreeSet<_>>().len();
        if better((objective, used), best.as_ref().map(|b| (b.0, b.1))) {
            best = Some((objective, used, entity_of));
        }
    }
    match best {
        Some((_, _, entity_of)) => Ok(problem.assignment(entity_of, SolveMethod::Relaxation)),
        None => Err(last_err.unwrap_or_else(|| Error::Infeasible("relaxation produced no assignment".into()))),
    }
}

/// Projects `v` onto the probability simplex.
fn project_simplex(v: &mut [f64]) {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

/// Maximizes `−Σ_j Σ_{i<k} d_ik w_ij w_kj − μ Σ_j max(0, load_j − 1)²` with
/// distances scaled to [0, 1] and loads in units of the threshold.
fn relax(problem: &PortfolioProblem, rng: &mut ChaCha8Rng, options: &SolveOptions) -> Vec<Vec<f64>> {
    let m = problem.companies.len();
    let n = problem.entities;
    let dmax = problem.distances.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    let d: Vec<Vec<f64>> = problem
        .distances
        .iter()
        .map(|row| row.iter().map(|&x| if dmax > 0.0 { x / dmax } else { 0.0 }).collect())
        .collect();
    let t = problem.threshold.cents() as f64;
    let v: Vec<f64> = problem.companies.iter().map(|c| c.valuation.cents() as f64 / t).collect();
    let penalty = 10.0 * m as f64;

    let mut w: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let mut row: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            project_simplex(&mut row);
            row
        })
        .collect();

    for _ in 0..options.iterations {
        let loads: Vec<f64> = (0..n).map(|j| (0..m).map(|i| v[i] * w[i][j]).sum()).collect();
        let mut grad = vec![vec![0.0; n]; m];
        for i in 0..m {
            for j in 0..n {
                let pull: f64 = (0..m).filter(|&k| k != i).map(|k| d[i][k] * w[k][j]).sum();
                grad[i][j] = -pull - 2.0 * penalty * v[i] * (loads[j] - 1.0).max(0.0);
            }
        }
        for i in 0..m {
            for j in 0..n {
                w[i][j] += options.step * grad[i][j];
            }
            project_simplex(&mut w[i]);
        }
    }
    w
}

/// Greedy rounding: most decided companies first, each to its heaviest
/// entity with room; overloads are repaired by moving the smallest member.
fn round(problem: &PortfolioProblem, w: &[Vec<f64>]) -> Result<Vec<usize>> {
    let m = problem.companies.len();
    let n = problem.entities;
    let ranked = |i: usize| -> Vec<usize> {
        let mut js: Vec<usize> = (0..n).collect();
        js.sort_by(|&a, &b| w[i][b].total_cmp(&w[i][a]).then(a.cmp(&b)));
        js
    };
    let mut order: Vec<usize> = (0..m).collect();
    let peak = |i: usize| w[i].iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    order.sort_by(|&a, &b| peak(b).total_cmp(&peak(a)).then(a.cmp(&b)));

    let mut entity_of = vec![0usize; m];
    let mut loads = vec![Money::ZERO; n];
    for &i in &order {
        let v = problem.companies[i].valuation;
        let prefs = ranked(i);
        let j = prefs.iter().copied().find(|&j| loads[j] + v <= problem.threshold).unwrap_or(prefs[0]);
        entity_of[i] = j;
        loads[j] += v;
    }

    for _ in 0..m * n + 1 {
        let Some(over) = (0..n).find(|&j| loads[j] > problem.threshold) else {
            return Ok(entity_of);
        };
        let violator = (0..m)
            .filter(|&i| entity_of[i] == over)
            .min_by_key(|&i| (problem.companies[i].valuation, i))
            .expect("overloaded entity has members");
        let v = problem.companies[violator].valuation;
        let Some(dest) = ranked(violator).into_iter().find(|&j| j != over && loads[j] + v <= problem.threshold) else {
            return Err(Error::Infeasible(format!(
                "company {} fits no entity under threshold {}",
                problem.companies[violator].id, problem.threshold
            )));
        };
        loads[over] -= v;
        loads[dest] += v;
        entity_of[violator] = dest;
    }
    Err(Error::Infeasible("capacity repair did not converge".into()))
}

/// Depth-first packing for tight thresholds where greedy rounding gets
/// stuck: largest companies first, entities tried in weight order.
fn pack(problem: &PortfolioProblem, w: &[Vec<f64>]) -> Result<Vec<usize>> {
    const NODE_LIMIT: usize = 200_000;
    let m = problem.companies.len();
    let n = problem.entities;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(problem.companies[i].valuation), i));
    let prefs: Vec<Vec<usize>> = (0..m)
        .map(|i| {
            let mut js: Vec<usize> = (0..n).collect();
            js.sort_by(|&a, &b| w[i][b].total_cmp(&w[i][a]).then(a.cmp(&b)));
            js
        })
        .collect();

    fn dfs(
        problem: &PortfolioProblem,
        order: &[usize],
        prefs: &[Vec<usize>],
        depth: usize,
        loads: &mut [Money],
        entity_of: &mut [usize],
        nodes: &mut usize,
    ) -> bool {
        if depth == order.len() {
            return true;
        }
        *nodes += 1;
        if *nodes > NODE_LIMIT {
            return false;
        }
        let i = order[depth];
        let v = problem.companies[i].valuation;
        let mut tried_empty = false;
        for &j in &prefs[i] {
            if loads[j] + v > problem.threshold {
                continue;
            }
            // empty entities are interchangeable
            if loads[j] == Money::ZERO {
                if tried_empty {
                    continue;
                }
                tried_empty = true;
            }
            loads[j] += v;
            entity_of[i] = j;
            if dfs(problem, order, prefs, depth + 1, loads, entity_of, nodes) {
                return true;
            }
            loads[j] -= v;
        }
        false
    }

    let mut loads = vec![Money::ZERO; n];
    let mut entity_of = vec![0; m];
    let mut nodes = 0;
    if dfs(problem, &order, &prefs, 0, &mut loads, &mut entity_of, &mut nodes) {
        Ok(entity_of)
    } else {
        Err(Error::Infeasible(format!(
            "no packing of {m} companies into {n} entities under threshold {} was found",
            problem.threshold
        )))
    }
}

/// Merges entities that fall below the optional valuation floor.
fn repair_floor(problem: &PortfolioProblem, w: &[Vec<f64>], mut entity_of: Vec<usize>) -> Result<Vec<usize>> {
    if problem.min_valuation.is_none() {
        return Ok(entity_of);
    }
    let n = problem.entities;
    for _ in 0..n {
        let loads = problem.loads(&entity_of);
        let Some(weak) = (0..n).find(|&j| problem.violates_floor(loads[j])) else {
            return Ok(entity_of);
        };
        let members: Vec<usize> = (0..entity_of.len()).filter(|&i| entity_of[i] == weak).collect();
        let dest = (0..n)
            .filter(|&j| j != weak && loads[j].is_positive() && loads[j] + loads[weak] <= problem.threshold)
            .max_by(|&a, &b| {
                let wa: f64 = members.iter().map(|&i| w[i][a]).sum();
                let wb: f64 = members.iter().map(|&i| w[i][b]).sum();
                wa.total_cmp(&wb).then(b.cmp(&a))
            })
            .ok_or_else(|| Error::Infeasible(format!("entity {} cannot reach the valuation floor", weak + 1)))?;
        for i in members {
            entity_of[i] = dest;
        }
    }
    problem.check_feasible(&entity_of)?;
    Ok(entity_of)
}

/// Assignment with per-entity distance sums, pair counts and loads kept
/// up to date, so a move is scored in `O(M)`.
#[derive(Clone)]
struct Search<'a> {
    problem: &'a PortfolioProblem,
    entity_of: Vec<usize>,
    size: Vec<usize>,
    dist: Vec<f64>,
    load: Vec<Money>,
}

impl<'a> Search<'a> {
    fn new(problem: &'a PortfolioProblem, entity_of: Vec<usize>) -> Self {
        let n = problem.entities;
        let mut s =
            Self { problem, entity_of: Vec::new(), size: vec![0; n], dist: vec![0.0; n], load: vec![Money::ZERO; n] };
        for (i, &j) in entity_of.iter().enumerate() {
            s.dist[j] += s.link(&entity_of[..i], i, j);
            s.size[j] += 1;
            s.load[j] += problem.companies[i].valuation;
        }
        s.entity_of = entity_of;
        s
    }

    /// Distance from `i` to the members of `j` among `labels`.
    fn link(&self, labels: &[usize], i: usize, j: usize) -> f64 {
        labels.iter().enumerate().filter(|&(k, &l)| l == j && k != i).map(|(k, _)| self.problem.distances[i][k]).sum()
    }

    fn score(size: usize, dist: f64) -> f64 {
        if size < 2 {
            0.0
        } else {
            -dist / (size * (size - 1) / 2) as f64
        }
    }

    fn objective(&self) -> f64 {
        (0..self.problem.entities).map(|j| Self::score(self.size[j], self.dist[j])).sum()
    }

    fn fits(&self, j: usize, extra: Money) -> bool {
        let load = self.load[j] + extra;
        load <= self.problem.threshold && !self.problem.violates_floor(load)
    }

    /// Objective change from moving `i` to `to`, or `None` if it breaks a bound.
    fn move_delta(&self, i: usize, to: usize) -> Option<f64> {
        let from = self.entity_of[i];
        if from == to {
            return None;
        }
        let v = self.problem.companies[i].valuation;
        if !self.fits(to, v) || (self.size[from] > 1 && self.problem.violates_floor(self.load[from] - v)) {
            return None;
        }
        let (lf, lt) = (self.link(&self.entity_of, i, from), self.link(&self.entity_of, i, to));
        let before = Self::score(self.size[from], self.dist[from]) + Self::score(self.size[to], self.dist[to]);
        let after =
            Self::score(self.size[from] - 1, self.dist[from] - lf) + Self::score(self.size[to] + 1, self.dist[to] + lt);
        Some(after - before)
    }

    fn apply_move(&mut self, i: usize, to: usize) {
        let from = self.entity_of[i];
        let (lf, lt) = (self.link(&self.entity_of, i, from), self.link(&self.entity_of, i, to));
        let v = self.problem.companies[i].valuation;
        self.dist[from] -= lf;
        self.size[from] -= 1;
        self.load[from] -= v;
        self.dist[to] += lt;
        self.size[to] += 1;
        self.load[to] += v;
        self.entity_of[i] = to;
    }

    /// Moves every member of `from` into `to` when the result is better.
    fn try_merge(&mut self, from: usize, to: usize) -> bool {
        if from == to || self.size[from] == 0 || self.size[to] == 0 || !self.fits(to, self.load[from]) {
            return false;
        }
        let mut next = self.clone();
        for i in 0..next.entity_of.len() {
            if next.entity_of[i] == from {
                next.apply_move(i, to);
            }
        }
        if next.objective() > self.objective() + OBJ_TOLERANCE {
            *self = next;
            true
        } else {
            false
        }
    }

    fn try_swap(&mut self, i: usize, k: usize) -> bool {
        let (a, b) = (self.entity_of[i], self.entity_of[k]);
        if a == b {
            return false;
        }
        let (vi, vk) = (self.problem.companies[i].valuation, self.problem.companies[k].valuation);
        if !self.fits(a, vk - vi) || !self.fits(b, vi - vk) {
            return false;
        }
        let before = self.objective();
        let mut next = self.clone();
        next.apply_move(i, b);
        next.apply_move(k, a);
        if next.objective() > before + OBJ_TOLERANCE {
            *self = next;
            true
        } else {
            false
        }
    }

    /// Swaps two companies if both entities stay within bounds.
    fn force_swap(&mut self, i: usize, k: usize) {
        let (a, b) = (self.entity_of[i], self.entity_of[k]);
        let (vi, vk) = (self.problem.companies[i].valuation, self.problem.companies[k].valuation);
        if a != b && self.fits(a, vk - vi) && self.fits(b, vi - vk) {
            self.apply_move(i, b);
            self.apply_move(k, a);
        }
    }

    /// Best split of the members of entities `a` and `b` between the two,
    /// found by walking all splits in Gray-code order. Applies it if better.
    fn repartition(&mut self, a: usize, b: usize) -> bool {
        let members: Vec<usize> =
            (0..self.entity_of.len()).filter(|&i| self.entity_of[i] == a || self.entity_of[i] == b).collect();
        let u = members.len();
        if a == b || !(2..=REPARTITION_LIMIT).contains(&u) {
            return false;
        }
        let d = &self.problem.distances;
        let val = |i: usize| self.problem.companies[i].valuation;
        // everyone starts in `a`
        let mut side = vec![false; u];
        let mut size = [u, 0];
        let mut dist = [0.0, 0.0];
        for x in 0..u {
            for y in x + 1..u {
                dist[0] += d[members[x]][members[y]];
            }
        }
        let mut load = [members.iter().map(|&i| val(i)).sum::<Money>(), Money::ZERO];
        let current = Self::score(self.size[a], self.dist[a]) + Self::score(self.size[b], self.dist[b]);
        let mut best: Option<(f64, Vec<bool>)> = None;
        let ok =
            |load: &[Money; 2]| load.iter().all(|&l| l <= self.problem.threshold && !self.problem.violates_floor(l));
        for step in 1u32..(1 << u) {
            let t = step.trailing_zeros() as usize;
            let from = side[t] as usize;
            let to = 1 - from;
            let (mut lf, mut lt) = (0.0, 0.0);
            for y in 0..u {
                if y != t {
                    if side[y] as usize == from {
                        lf += d[members[t]][members[y]];
                    } else {
                        lt += d[members[t]][members[y]];
                    }
                }
            }
            dist[from] -= lf;
            dist[to] += lt;
            size[from] -= 1;
            size[to] += 1;
            load[from] -= val(members[t]);
            load[to] += val(members[t]);
            side[t] = !side[t];
            if ok(&load) {
                let v = Self::score(size[0], dist[0]) + Self::score(size[1], dist[1]);
                if v > current + OBJ_TOLERANCE && best.as_ref().is_none_or(|(bv, _)| v > *bv + OBJ_TOLERANCE) {
                    best = Some((v, side.clone()));
                }
            }
        }
        let Some((_, split)) = best else {
            return false;
        };
        for (x, &i) in members.iter().enumerate() {
            let target = if split[x] { b } else { a };
            if self.entity_of[i] != target {
                self.apply_move(i, target);
            }
        }
        true
    }

    /// Alternates plain descent with pairwise re-splits until neither helps.
    fn polish(&mut self) {
        let n = self.problem.entities;
        loop {
            self.descend();
            let mut improved = false;
            for a in 0..n {
                for b in a + 1..n {
                    improved |= self.repartition(a, b);
                }
            }
            if !improved {
                return;
            }
        }
    }

    /// First-improvement descent over moves, swaps and entity merges.
    fn descend(&mut self) {
        let m = self.entity_of.len();
        let n = self.problem.entities;
        loop {
            let mut improved = false;
            for i in 0..m {
                for j in 0..n {
                    if self.move_delta(i, j).is_some_and(|d| d > OBJ_TOLERANCE) {
                        self.apply_move(i, j);
                        improved = true;
                    }
                }
            }
            for i in 0..m {
                for k in i + 1..m {
                    improved |= self.try_swap(i, k);
                }
            }
            for a in 0..n {
                for b in 0..n {
                    improved |= self.try_merge(a, b);
                }
            }
            if !improved {
                return;
            }
        }
    }
}

/// Descent on the true objective, then `kicks` rounds of moving a few random
/// companies and descending again, keeping the best assignment seen.
fn perturb_and_descend(
    problem: &PortfolioProblem,
    entity_of: Vec<usize>,
    rng: &mut ChaCha8Rng,
    kicks: usize,
) -> Vec<usize> {
    let mut best = Search::new(problem, entity_of);
    best.descend();
    let m = best.entity_of.len();
    let n = problem.entities;
    if n < 2 {
        return best.entity_of;
    }
    let mut current = best.clone();
    for _ in 0..kicks {
        let mut trial = current.clone();
        for _ in 0..rng.gen_range(1..=3.min(m)) {
            let i = rng.gen_range(0..m);
            if rng.gen_bool(0.5) {
                let j = rng.gen_range(0..n);
                if trial.move_delta(i, j).is_some() {
                    trial.apply_move(i, j);
                }
            } else {
                let k = rng.gen_range(0..m);
                trial.force_swap(i, k);
            }
        }
        trial.descend();
        if trial.objective() >= current.objective() - OBJ_TOLERANCE {
            current = trial;
        }
        if current.objective() > best.objective() + OBJ_TOLERANCE {
            best = current.clone();
        }
    }
    best.polish();
    best.entity_of
}

#[cfg(test)]
mod tests {
    use super::*;

    fn site(id: &str, v: i64, x: f64, y: f64) -> CompanySite {
        CompanySite::new(id, Money::from_cents(v), x, y)
    }

    #[test]
    fn compatibility_examples() {
        assert_eq!(compatibility_score(&[site("a", 1, 5.0, 5.0)]).unwrap(), 0.0);
        assert_eq!(compatibility_score(&[site("a", 1, 0.0, 0.0), site("b", 1, 100.0, 0.0)]).unwrap(), -100.0);
        let tri = [site("a", 1, 0.0, 0.0), site("b", 1, 3.0, 0.0), site("c", 1, 0.0, 4.0)];
        assert!((compatibility_score(&tri).unwrap() + 4.0).abs() < 1e-12);
        assert!(compatibility_score(&[]).is_err());
    }

    #[test]
    fn single_company() {
        let p = PortfolioProblem::new(vec![site("a", 100, 0.0, 0.0)], 1, Money::from_cents(100)).unwrap();
        let a = optimize_portfolio(&p, &SolveOptions::default()).unwrap();
        assert_eq!(a.objective, 0.0);
        assert_eq!(a.entity_of(), &[0]);
    }

    #[test]
    fn co_located_pair_shares_an_entity() {
        let p =
            PortfolioProblem::new(vec![site("a", 100, 1.0, 1.0), site("b", 100, 1.0, 1.0)], 2, Money::from_cents(200))
                .unwrap();
        let a = optimize_portfolio(&p, &SolveOptions::default()).unwrap();
        assert_eq!(a.objective, 0.0);
        assert_eq!(a.nonempty_entities(), 1);
    }

    #[test]
    fn clustered_pairs() {
        let sites = vec![
            site("a", 100, 0.0, 0.0),
            site("b", 100, 10.0, 0.0),
            site("c", 100, 1000.0, 0.0),
            site("d", 100, 1010.0, 0.0),
        ];
        let p = PortfolioProblem::new(sites, 2, Money::from_cents(10_000)).unwrap();
        let a = optimize_portfolio(&p, &SolveOptions::default()).unwrap();
        assert!((a.objective + 20.0).abs() < 1e-9);
        assert_eq!(a.entity_of(), &[0, 0, 1, 1]);
        let h = optimize_portfolio(&p, &SolveOptions { force_heuristic: true, ..Default::default() }).unwrap();
        assert!((h.objective + 20.0).abs() < 1e-9);
    }

    #[test]
    fn threshold_below_every_valuation_is_infeasible() {
        let err =
            PortfolioProblem::new(vec![site("a", 100, 0.0, 0.0), site("b", 50, 0.0, 0.0)], 2, Money::from_cents(40))
                .unwrap_err();
        assert!(matches!(err, Error::Infeasible(ref msg) if msg.contains("company a")), "{err}");
    }

    #[test]
    fn packing_infeasibility_is_reported() {
        let sites = vec![site("a", 60, 0.0, 0.0), site("b", 60, 0.0, 0.0), site("c", 60, 0.0, 0.0)];
        let p = PortfolioProblem::new(sites, 2, Money::from_cents(100)).unwrap();
        assert!(matches!(brute_force_portfolio(&p), Err(Error::Infeasible(_))));
        assert!(matches!(
            optimize_portfolio(&p, &SolveOptions { force_heuristic: true, ..Default::default() }),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn too_large_for_enumeration() {
        let sites: Vec<_> = (0..21).map(|i| site(&format!("c{i}"), 1, i as f64, 0.0)).collect();
        let p = PortfolioProblem::new(sites, 2, Money::from_cents(100)).unwrap();
        assert!(matches!(brute_force_portfolio(&p), Err(Error::InstanceTooLarge { .. })));
    }

    #[test]
    fn valuation_floor_forces_merging() {
        let sites = vec![site("a", 50, 0.0, 0.0), site("b", 50, 0.0, 0.0), site("c", 50, 1000.0, 0.0)];
        let instance = InstanceFile {
            companies: sites,
            entities: 2,
            threshold: Money::from_cents(200),
            min_valuation: Some(Money::from_cents(120)),
            pairwise_distances: None,
        };
        let p = PortfolioProblem::from_instance(instance).unwrap();
        let exact = brute_force_portfolio(&p).unwrap();
        assert_eq!(exact.nonempty_entities(), 1);
        let h = optimize_portfolio(&p, &SolveOptions { force_heuristic: true, ..Default::default() }).unwrap();
        assert!((h.objective - exact.objective).abs() < 1e-9);
    }

    #[test]
    fn simplex_projection() {
        let mut v = vec![0.5, 0.5, 0.5];
        project_simplex(&mut v);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut v = vec![2.0, 0.0];
        project_simplex(&mut v);
        assert_eq!(v, vec![1.0, 0.0]);
    }
}
