//! End-to-end experiments: the two limits of the truncated families, the
//! selection of the mollification level, and the lifted autonomous field.

use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::advect::{solve, Remap, SolverConfig, Trajectory};
use crate::analysis::weak_gap_grid;
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::field::{FieldSpec, Variant, FIELD_BOUND};
use crate::flow::{branch_snapshot, lifted_snapshot, stages_until, Branch};
use crate::geometry::{rho_in, CellField, Window};
use crate::grid::{l1_distance, pairwise_sum, GridField};
use crate::mollify::{mollified_data_at, MollifiedField};

/// Numerical resolution and search limits.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Budget {
    pub h: Dyadic,
    pub cfl: f64,
    /// First and last mollification level tried by [`select_j`].
    pub j_start: u32,
    pub j_max: u32,
}

impl Budget {
    pub fn new(h: Dyadic) -> Self {
        Budget {
            h,
            cfl: 0.5,
            j_start: 2,
            j_max: 8,
        }
    }
}

/// Diagnostics of one checkpoint of a numerical run.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct CheckpointRow {
    pub t: Dyadic,
    /// L1 distance per unit area to the exact truncated branch on `Q_1`.
    pub l1_to_exact: f64,
    /// Level-0 weak gap of the numerical density on `Q_1`.
    pub weak_gap0: f64,
    pub min: f64,
    pub max: f64,
    /// SHA-256 of the GF01 encoding of the snapshot.
    pub checksum: String,
}

/// One numerical solve of the truncated family member `(variant, i)` at
/// mollification level `j`.
#[derive(Clone, Debug)]
pub struct BranchRun {
    pub variant: Variant,
    pub i: u32,
    pub j: u32,
    pub rows: Vec<CheckpointRow>,
    /// `sum_k (t_k - t_{k-1}) |rho_num(t_k) - rho(t_k)|`, over `Q_1`.
    pub riemann_l1: f64,
    pub trajectory: Trajectory,
    pub data: GridField,
}

impl BranchRun {
    pub fn end_state(&self) -> &GridField {
        self.trajectory.last()
    }
}

pub fn checksum(g: &GridField) -> String {
    hex::encode(Sha256::digest(g.to_gf01()))
}

/// Stage endpoints of the truncated field up to `t = 2`.
pub fn checkpoints(spec: &FieldSpec) -> Result<Vec<Dyadic>> {
    let mut cps: Vec<Dyadic> = stages_until(spec, Dyadic::from_int(2))?
        .iter()
        .map(|s| s.end())
        .collect();
    if cps.last() != Some(&Dyadic::from_int(2)) {
        cps.push(Dyadic::from_int(2));
    }
    Ok(cps)
}

/// Solve the mollified truncated problem on the periodic `Q_1` and compare
/// with the exact branch at every stage endpoint.
pub fn run_branch(i: u32, variant: Variant, j: u32, budget: &Budget) -> Result<BranchRun> {
    let window = Window::q(1);
    let h = budget.h.to_f64();
    let spec = FieldSpec::base().truncate_time(i, variant)?;
    let field = MollifiedField::new(&spec, j)?;
    let data = GridField::from_fn(&window, h, |p| mollified_data_at(j, None, p))?;
    let cps = checkpoints(&spec)?;
    let mut cfg = SolverConfig::new(window, h, cps.clone());
    cfg.cfl = budget.cfl;
    cfg.remap = Remap::AtCheckpoints;
    let trajectory = solve(&field, &data, &cfg)?;
    let branch = Branch::Truncated(variant, i);
    let mut rows = Vec::new();
    let mut terms = Vec::new();
    let mut prev = Dyadic::ZERO;
    for (t, g) in &trajectory.snapshots {
        let level = branch.required_level(*t)?.max(1);
        let exact = GridField::from_cells(&branch_snapshot(branch, *t, level, window)?, h)?;
        let d = l1_distance(g, &exact, &window)?;
        terms.push((*t - prev).to_f64() * d);
        prev = *t;
        let (min, max) = g.min_max();
        rows.push(CheckpointRow {
            t: *t,
            l1_to_exact: d,
            weak_gap0: weak_gap_grid(g, 0, window)?,
            min,
            max,
            checksum: checksum(g),
        });
    }
    Ok(BranchRun {
        variant,
        i,
        j,
        rows,
        riemann_l1: pairwise_sum(&terms),
        trajectory,
        data,
    })
}

/// Result of the search for `j(i)`.
#[derive(Clone, Debug)]
pub struct Selection {
    pub i: u32,
    pub target: f64,
    pub j: u32,
    /// Summed Riemann distance over both variants at the returned `j`.
    pub distance: f64,
    /// False when the budget ran out first; `j` is then the best level seen.
    pub met: bool,
    /// `(j, summed distance)` for every level tried.
    pub ladder: Vec<(u32, f64)>,
    /// The runs at the returned `j`: variant 1 then variant 2.
    pub runs: Vec<BranchRun>,
}

/// Smallest `j` in `budget.j_start..=budget.j_max` whose solves of both
/// truncation variants lie within `target` of the exact branches, in the
/// checkpoint Riemann sum of the L1 distance on `Q_1`.
pub fn select_j(i: u32, target: f64, budget: &Budget) -> Result<Selection> {
    if budget.j_start > budget.j_max {
        return Err(Error::InvalidParameter(format!(
            "empty mollification ladder {}..={}",
            budget.j_start, budget.j_max
        )));
    }
    if target.is_nan() || target < 0.0 {
        return Err(Error::InvalidParameter(format!("target {target}")));
    }
    let mut ladder = Vec::new();
    let mut best: Option<(f64, u32, Vec<BranchRun>)> = None;
    for j in budget.j_start..=budget.j_max {
        let runs = vec![
            run_branch(i, Variant::Asymmetric, j, budget)?,
            run_branch(i, Variant::Symmetric, j, budget)?,
        ];
        let d = runs[0].riemann_l1 + runs[1].riemann_l1;
        ladder.push((j, d));
        if d <= target {
            return Ok(Selection {
                i,
                target,
                j,
                distance: d,
                met: true,
                ladder,
                runs,
            });
        }
        if best.as_ref().is_none_or(|b| d < b.0) {
            best = Some((d, j, runs));
        }
    }
    let (distance, j, runs) = best.unwrap();
    Ok(Selection {
        i,
        target,
        j,
        distance,
        met: false,
        ladder,
        runs,
    })
}

/// Exact L1 distance per unit area between two cell fields on the same
/// window, in dyadic arithmetic.
pub fn exact_l1_distance(a: &CellField, b: &CellField) -> Result<Dyadic> {
    if a.window() != b.window() {
        return Err(Error::InvalidParameter("cell fields on different windows".into()));
    }
    let level = a.level().max(b.level());
    let (a, b) = (a.refine(level)?, b.refine(level)?);
    let n = a.cells_per_side();
    let mut sum = Dyadic::ZERO;
    for iy in 0..n {
        for ix in 0..n {
            sum = sum + (a.local(ix, iy) - b.local(ix, iy)).abs();
        }
    }
    // each cell is 1/n^2 of the window
    Ok(sum * Dyadic::pow2(-2 * (n.trailing_zeros() as i32)))
}

/// Per-`i` diagnostics of the two-limit experiment.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Theorem2Row {
    pub i: u32,
    pub j: u32,
    pub selection_met: bool,
    pub selection_distance: f64,
    pub ladder: Vec<(u32, f64)>,
    /// `|rho_in * psi_j - rho_in|` on `Q_1`, per unit area.
    pub data_l1: f64,
    /// Space-time L1 distance of the mollified field to the truncated field
    /// on `[0, 2] x Q_1`, by stage midpoints.
    pub field_l1: f64,
    /// Largest sampled `|b_{i,j}|`; never above 2.
    pub field_sup: f64,
    pub density_range: (f64, f64),
    /// Level-0 weak gap of the variant-1 end state on `Q_1`.
    pub v1_weak_gap0: f64,
    pub v1_l1_to_rho_in: f64,
    pub v2_l1_to_rho_in: f64,
    /// L1 distance between the two numerical end states.
    pub end_state_distance: f64,
    /// Exact variant-1 end state: level `2i - 1` weak gap (0 expected).
    pub exact_v1_gap: Dyadic,
    /// Exact variant-2 end state equals `rho_in` cell for cell.
    pub exact_v2_is_rho_in: bool,
    /// Checkpoints up to `1 - 2^-2i` carry identical snapshots for both
    /// variants.
    pub common_prefix_identical: bool,
    pub v1: Vec<CheckpointRow>,
    pub v2: Vec<CheckpointRow>,
}

/// Manifest of a scenario run: inputs, diagnostics and artifact names.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct RunManifest {
    pub scenario: String,
    pub params: serde_json::Value,
    pub diagnostics: serde_json::Value,
    pub artifacts: Vec<String>,
    pub timings_s: Vec<(String, f64)>,
}

/// Files produced by a scenario, keyed by relative path.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn push(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|f| f.0.clone()).collect()
    }
}

fn field_distance(spec: &FieldSpec, field: &MollifiedField, h: f64) -> Result<(f64, f64)> {
    let window = Window::q(1);
    let mut total = Vec::new();
    let mut sup: f64 = 0.0;
    for s in spec.active_stages(0) {
        let t = 0.5 * (s.start() + s.end()).to_f64();
        let frozen = field.at(t);
        let exact = GridField::from_fn(&window, h, |p| {
            let v = spec.eval(t, p);
            let m = frozen.eval(p);
            (v[0] - m[0]).hypot(v[1] - m[1])
        })?;
        let mags = GridField::from_fn(&window, h, |p| {
            let m = frozen.eval(p);
            m[0].hypot(m[1])
        })?;
        sup = sup.max(mags.min_max().1);
        total.push(s.duration().to_f64() * exact.integral() / window.area());
    }
    Ok((pairwise_sum(&total), sup))
}

fn csv_rows(variant: Variant, rows: &[CheckpointRow]) -> String {
    let mut s = String::new();
    for r in rows {
        s += &format!(
            "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{}\n",
            variant.number(),
            r.t,
            r.l1_to_exact,
            r.weak_gap0,
            r.min,
            r.max,
            r.checksum
        );
    }
    s
}

pub const CHECKPOINT_CSV_HEADER: &str = "variant,t,l1_to_exact,weak_gap0,min,max,sha256\n";

/// Both truncation variants for every `i`, at `j(i)` from [`select_j`].
pub fn run_theorem2(i_list: &[u32], target: Option<f64>, budget: &Budget) -> Result<(RunManifest, Artifacts)> {
    if i_list.is_empty() || i_list.iter().any(|&i| i == 0 || i > 4) {
        return Err(Error::InvalidParameter(format!("stage indices {i_list:?} outside 1..=4")));
    }
    let window = Window::q(1);
    let h = budget.h.to_f64();
    let two = Dyadic::from_int(2);
    let rho = GridField::from_fn(&window, h, rho_in)?;
    let mut rows = Vec::new();
    let mut artifacts = Artifacts::default();
    let mut timings = Vec::new();
    for &i in i_list {
        let clock = Instant::now();
        let tgt = target.unwrap_or((-(i as f64)).exp2());
        let sel = select_j(i, tgt, budget)?;
        timings.push((format!("select_j i={i}"), clock.elapsed().as_secs_f64()));
        let (v1, v2) = (&sel.runs[0], &sel.runs[1]);
        let spec1 = FieldSpec::base().truncate_time(i, Variant::Asymmetric)?;
        let spec2 = FieldSpec::base().truncate_time(i, Variant::Symmetric)?;
        let (field_l1, field_sup) = field_distance(&spec2, &MollifiedField::new(&spec2, sel.j)?, h)?;
        let (_, sup1) = field_distance(&spec1, &MollifiedField::new(&spec1, sel.j)?, h)?;
        let range = [v1, v2].iter().flat_map(|r| r.rows.iter()).fold((f64::MAX, f64::MIN), |(a, b), r| {
            (a.min(r.min), b.max(r.max))
        });
        let level = 2 * i + 2;
        let e1 = branch_snapshot(Branch::Truncated(Variant::Asymmetric, i), two, level, window)?;
        let e2 = branch_snapshot(Branch::Truncated(Variant::Symmetric, i), two, level, window)?;
        let split = Dyadic::ONE - Dyadic::pow2(-2 * i as i32);
        let prefix = |r: &BranchRun| -> Vec<String> {
            r.rows.iter().filter(|c| c.t <= split).map(|c| c.checksum.clone()).collect()
        };
        rows.push(Theorem2Row {
            i,
            j: sel.j,
            selection_met: sel.met,
            selection_distance: sel.distance,
            ladder: sel.ladder.clone(),
            data_l1: l1_distance(&v1.data, &rho, &window)?,
            field_l1,
            field_sup: field_sup.max(sup1),
            density_range: range,
            v1_weak_gap0: weak_gap_grid(v1.end_state(), 0, window)?,
            v1_l1_to_rho_in: l1_distance(v1.end_state(), &rho, &window)?,
            v2_l1_to_rho_in: l1_distance(v2.end_state(), &rho, &window)?,
            end_state_distance: l1_distance(v1.end_state(), v2.end_state(), &window)?,
            exact_v1_gap: crate::analysis::weak_gap(&e1, 2 * i - 1, window)?,
            exact_v2_is_rho_in: e2 == crate::geometry::checkerboard(0, window)?.refine(level)?,
            common_prefix_identical: prefix(v1) == prefix(v2),
            v1: v1.rows.clone(),
            v2: v2.rows.clone(),
        });
        let mut csv = String::from(CHECKPOINT_CSV_HEADER);
        csv += &csv_rows(Variant::Asymmetric, &v1.rows);
        csv += &csv_rows(Variant::Symmetric, &v2.rows);
        artifacts.push(format!("i{i}_checkpoints.csv"), csv.into_bytes());
        for r in [v1, v2] {
            let tag = format!("i{i}_v{}_end", r.variant.number());
            artifacts.push(format!("{tag}.gf01"), r.end_state().to_gf01());
            artifacts.push(format!("{tag}.pgm"), r.end_state().to_pgm());
        }
    }
    let prime = branch_snapshot(Branch::Prime, two, 0, window)?;
    let tilde = branch_snapshot(Branch::Tilde, two, 0, window)?;
    let floor = exact_l1_distance(&prime, &tilde)?;
    let mut summary = String::from(
        "i,j,met,selection_distance,data_l1,field_l1,field_sup,v1_weak_gap0,v1_l1_to_rho_in,v2_l1_to_rho_in,end_state_distance\n",
    );
    for r in &rows {
        summary += &format!(
            "{},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            r.i,
            r.j,
            r.selection_met,
            r.selection_distance,
            r.data_l1,
            r.field_l1,
            r.field_sup,
            r.v1_weak_gap0,
            r.v1_l1_to_rho_in,
            r.v2_l1_to_rho_in,
            r.end_state_distance
        );
    }
    artifacts.push("theorem2.csv", summary.into_bytes());
    let manifest = RunManifest {
        scenario: "theorem2".into(),
        params: serde_json::json!({
            "i": i_list,
            "target": target,
            "budget": budget,
            "window": "Q1 periodic",
            "bound": FIELD_BOUND,
        }),
        diagnostics: serde_json::json!({
            "rows": rows,
            "distinctness_floor": floor,
        }),
        artifacts: artifacts.names(),
        timings_s: timings,
    };
    Ok((manifest, artifacts))
}

/// One slice comparison of the lifted branches.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct LiftRow {
    pub t: Dyadic,
    pub y0: Dyadic,
    /// L1 distance per unit area between the lifted prime and tilde slices.
    pub distance: Dyadic,
    pub identical: bool,
    pub prime_constant: Option<Dyadic>,
    pub tilde_is_rho_in: bool,
}

/// Slices `y0` of the lifted prime and tilde solutions at the times `t`.
pub fn run_lifted(t_list: &[Dyadic], slices: &[Dyadic], level: u32) -> Result<(RunManifest, Artifacts)> {
    let window = Window::q(1);
    let rho = crate::geometry::checkerboard(0, window)?.refine(level)?;
    let mut rows = Vec::new();
    let mut artifacts = Artifacts::default();
    let mut csv = String::from("t,y0,distance,identical,prime_constant,tilde_is_rho_in\n");
    let h = Dyadic::pow2(-(level as i32) - 1).to_f64();
    for &t in t_list {
        for &y0 in slices {
            let p = lifted_snapshot(Branch::Prime, t, y0, level, window)?;
            let q = lifted_snapshot(Branch::Tilde, t, y0, level, window)?;
            let (lo, hi) = p.range();
            let row = LiftRow {
                t,
                y0,
                distance: exact_l1_distance(&p, &q)?,
                identical: p == q,
                prime_constant: (lo == hi).then_some(lo),
                tilde_is_rho_in: q == rho,
            };
            csv += &format!(
                "{},{},{},{},{},{}\n",
                row.t,
                row.y0,
                row.distance,
                row.identical,
                row.prime_constant.map_or("-".into(), |c| c.to_string()),
                row.tilde_is_rho_in
            );
            let tag = format!("t{}_y{}", t.to_literal(), y0.to_literal()).replace(['/', '^'], "_");
            artifacts.push(format!("{tag}_prime.pgm"), GridField::from_cells(&p, h)?.to_pgm());
            artifacts.push(format!("{tag}_tilde.pgm"), GridField::from_cells(&q, h)?.to_pgm());
            rows.push(row);
        }
    }
    artifacts.push("lifted.csv", csv.into_bytes());
    let manifest = RunManifest {
        scenario: "lifted".into(),
        params: serde_json::json!({ "t": t_list, "y0": slices, "level": level }),
        diagnostics: serde_json::json!({ "rows": rows }),
        artifacts: artifacts.names(),
        timings_s: Vec::new(),
    };
    Ok((manifest, artifacts))
}
