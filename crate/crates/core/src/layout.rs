//! Surface-code grid construction, the bi-linear fold, and resource
//! arithmetic.
//!
//! A distance-`d` planar patch occupies `M = 2d-1` rows. `N` logical patches
//! sit side by side in one `M`-row strip, separated by single spacer columns
//! of data-only qubits, giving `N*M + (N-1)` columns in total. The fold packs
//! the columns onto two rails (even-indexed columns on rail 0, odd-indexed on
//! rail 1) so every qubit is reachable from a chip edge; inter-column
//! resonators then hop over one another and each hop costs one airbridge.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("code distance must be an odd integer >= 3, got {0}")]
    InvalidDistance(u32),
    #[error("logical qubit count must be >= 1, got {0}")]
    InvalidLogicalCount(u32),
    #[error("layout is already folded")]
    AlreadyFolded,
    #[error("layout is not folded (folded_pos unset)")]
    NotFolded,
    #[error("layout contains no qubits")]
    EmptyLayout,
}

/// Boundary variant of the planar code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Encoding {
    Square,
    Rotated,
}

/// Code distance, logical qubit count, and encoding variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceCodeSpec {
    pub d: u32,
    #[serde(rename = "N")]
    pub n: u32,
    pub encoding: Encoding,
}

impl SurfaceCodeSpec {
    pub fn new(d: u32, n: u32, encoding: Encoding) -> Result<Self, LayoutError> {
        let spec = SurfaceCodeSpec { d, n, encoding };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        if self.d < 3 || self.d % 2 == 0 {
            return Err(LayoutError::InvalidDistance(self.d));
        }
        if self.n < 1 {
            return Err(LayoutError::InvalidLogicalCount(self.n));
        }
        Ok(())
    }

    /// Qubits per column, `M = 2d - 1`.
    pub fn rows(&self) -> u32 {
        2 * self.d - 1
    }

    /// Total columns including the `N - 1` spacer columns.
    pub fn columns(&self) -> u32 {
        self.n * self.rows() + (self.n - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QubitRole {
    Data,
    SyndromeX,
    SyndromeZ,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitNode {
    pub id: u32,
    pub role: QubitRole,
    /// `(row, col)` in the pre-fold 2D lattice.
    pub grid_pos: (u32, u32),
    /// `(rail, index)` after the fold; `None` in a pre-fold layout.
    pub folded_pos: Option<(u8, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonatorEdge {
    /// Ids of the two coupled qubits.
    pub endpoints: (u32, u32),
    /// Airbridge count in the folded layout; 0 before folding.
    pub crossings: u32,
    /// Assigned frequency in Hz, set by the frequency planner.
    pub frequency: Option<f64>,
    /// Spacer couplings are physically present but held inactive.
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalLayout {
    pub spec: SurfaceCodeSpec,
    pub qubits: Vec<QubitNode>,
    pub resonators: Vec<ResonatorEdge>,
}

/// What a column holds: part of logical block `b`, or a spacer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Block { block: u32, local_col: u32 },
    Spacer,
}

impl SurfaceCodeSpec {
    pub fn column_kind(&self, col: u32) -> ColumnKind {
        let stride = self.rows() + 1;
        if col % stride == self.rows() {
            ColumnKind::Spacer
        } else {
            ColumnKind::Block {
                block: col / stride,
                local_col: col % stride,
            }
        }
    }
}

/// Resource formulas evaluated for a spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceSummary {
    /// Qubits per column.
    #[serde(rename = "M")]
    pub m: u32,
    pub columns: u32,
    pub total_qubits: u32,
    pub max_airbridges_per_resonator: u32,
    pub qubits_per_logical_block: u32,
}

impl fmt::Display for ResourceSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "qubits per column (M)        {:>8}", self.m)?;
        writeln!(f, "columns                      {:>8}", self.columns)?;
        writeln!(f, "total qubits                 {:>8}", self.total_qubits)?;
        writeln!(
            f,
            "max airbridges per resonator {:>8}",
            self.max_airbridges_per_resonator
        )?;
        write!(
            f,
            "qubits per logical block     {:>8}",
            self.qubits_per_logical_block
        )
    }
}

/// Evaluate the resource formulas without building the grid.
pub fn resource_estimate(spec: &SurfaceCodeSpec) -> Result<ResourceSummary, LayoutError> {
    spec.validate()?;
    let d = spec.d;
    let m = 2 * d - 1;
    let columns = spec.n * m + (spec.n - 1);
    let (per_block, total) = match spec.encoding {
        Encoding::Square => (m * m, (2 * d - 1) * (2 * d * spec.n - 1)),
        Encoding::Rotated => {
            let per_block = 2 * d * d - 1;
            (per_block, spec.n * per_block + (spec.n - 1) * m)
        }
    };
    Ok(ResourceSummary {
        m,
        columns,
        total_qubits: total,
        max_airbridges_per_resonator: d - 1,
        qubits_per_logical_block: per_block,
    })
}

/// Role of an occupied cell, or `None` if the cell is vacant.
///
/// Square blocks are fully occupied and tile data/X/Z as a checkerboard.
/// Rotated blocks keep `d^2` data qubits on the even/even sublattice,
/// `(d-1)^2` plaquette ancillas on odd/odd, and `2(d-1)` weight-2 boundary
/// ancillas folded into the vacant edge cells, for `2d^2 - 1` per block.
fn cell_role(spec: &SurfaceCodeSpec, row: u32, col: u32) -> Option<QubitRole> {
    let (block_col, is_spacer) = match spec.column_kind(col) {
        ColumnKind::Spacer => (0, true),
        ColumnKind::Block { local_col, .. } => (local_col, false),
    };
    if is_spacer {
        return Some(QubitRole::Data);
    }
    match spec.encoding {
        Encoding::Square => {
            if (row + col) % 2 == 0 {
                Some(QubitRole::Data)
            } else if row % 2 == 1 {
                Some(QubitRole::SyndromeX)
            } else {
                Some(QubitRole::SyndromeZ)
            }
        }
        Encoding::Rotated => {
            let d = spec.d;
            let m = spec.rows();
            let (r, c) = (row, block_col);
            match (r % 2, c % 2) {
                (0, 0) => Some(QubitRole::Data),
                (1, 1) => {
                    let (i, j) = ((r - 1) / 2, (c - 1) / 2);
                    if (i + j) % 2 == 0 {
                        Some(QubitRole::SyndromeX)
                    } else {
                        Some(QubitRole::SyndromeZ)
                    }
                }
                (0, 1) => {
                    // Top/bottom boundary ancillas at alternating plaquette
                    // columns; both rows continue the interior checkerboard.
                    let j = (c - 1) / 2;
                    if (r == 0 && j % 2 == 1) || (r == m - 1 && j % 2 == 0 && j < d - 1) {
                        Some(QubitRole::SyndromeX)
                    } else {
                        None
                    }
                }
                (1, 0) => {
                    let i = (r - 1) / 2;
                    if (c == 0 && i % 2 == 0) || (c == m - 1 && i % 2 == 1) {
                        Some(QubitRole::SyndromeZ)
                    } else {
                        None
                    }
                }
                _ => unreachable!(),
            }
        }
    }
}

/// Build the pre-fold layout: occupied cells, roles, and the coupling set.
pub fn build_grid(spec: &SurfaceCodeSpec) -> Result<PhysicalLayout, LayoutError> {
    spec.validate()?;
    let rows = spec.rows();
    let cols = spec.columns();

    let mut qubits = Vec::new();
    let mut id_at: HashMap<(u32, u32), u32> = HashMap::new();
    for row in 0..rows {
        for col in 0..cols {
            if let Some(role) = cell_role(spec, row, col) {
                let id = qubits.len() as u32;
                id_at.insert((row, col), id);
                qubits.push(QubitNode {
                    id,
                    role,
                    grid_pos: (row, col),
                    folded_pos: None,
                });
            }
        }
    }

    let mut resonators = Vec::new();
    let mut push_edge = |id_at: &HashMap<(u32, u32), u32>, a: (u32, u32), b: (u32, u32)| {
        let (ia, ib) = (id_at[&a], id_at[&b]);
        let active = !matches!(spec.column_kind(a.1), ColumnKind::Spacer)
            && !matches!(spec.column_kind(b.1), ColumnKind::Spacer);
        resonators.push(ResonatorEdge {
            endpoints: (ia.min(ib), ia.max(ib)),
            crossings: 0,
            frequency: None,
            active,
        });
    };

    match spec.encoding {
        Encoding::Square => {
            // Fully occupied grid: every horizontal and vertical neighbor pair.
            for row in 0..rows {
                for col in 0..cols {
                    if col + 1 < cols {
                        push_edge(&id_at, (row, col), (row, col + 1));
                    }
                    if row + 1 < rows {
                        push_edge(&id_at, (row, col), (row + 1, col));
                    }
                }
            }
        }
        Encoding::Rotated => {
            for &(row, col) in qubits.iter().map(|q| &q.grid_pos) {
                match spec.column_kind(col) {
                    ColumnKind::Spacer => {
                        // Horizontal links into the neighboring block columns
                        // plus the vertical chain within the spacer itself.
                        for nc in [col - 1, col + 1] {
                            if nc < cols && id_at.contains_key(&(row, nc)) {
                                push_edge(&id_at, (row, col), (row, nc));
                            }
                        }
                        if row + 1 < rows {
                            push_edge(&id_at, (row, col), (row + 1, col));
                        }
                    }
                    ColumnKind::Block { local_col, .. } => {
                        let (r, c) = (row, local_col);
                        if r % 2 == 1 && c % 2 == 1 {
                            // Plaquette ancilla: four diagonal data neighbors.
                            for (dr, dc) in [(-1i64, -1i64), (-1, 1), (1, -1), (1, 1)] {
                                let nb = ((row as i64 + dr) as u32, (col as i64 + dc) as u32);
                                if id_at.contains_key(&nb) {
                                    push_edge(&id_at, (row, col), nb);
                                }
                            }
                        } else if r % 2 == 0 && c % 2 == 1 {
                            // Top/bottom boundary ancilla: horizontal pair.
                            push_edge(&id_at, (row, col), (row, col - 1));
                            push_edge(&id_at, (row, col), (row, col + 1));
                        } else if r % 2 == 1 && c % 2 == 0 {
                            // Left/right boundary ancilla: vertical pair.
                            push_edge(&id_at, (row, col), (row - 1, col));
                            push_edge(&id_at, (row, col), (row + 1, col));
                        }
                    }
                }
            }
        }
    }

    Ok(PhysicalLayout {
        spec: *spec,
        qubits,
        resonators,
    })
}

impl PhysicalLayout {
    pub fn is_folded(&self) -> bool {
        !self.qubits.is_empty() && self.qubits.iter().all(|q| q.folded_pos.is_some())
    }

    /// Qubit lookup by grid position.
    pub fn occupancy(&self) -> HashMap<(u32, u32), u32> {
        self.qubits.iter().map(|q| (q.grid_pos, q.id)).collect()
    }

    pub fn rail_sizes(&self) -> (usize, usize) {
        let r1 = self
            .qubits
            .iter()
            .filter(|q| matches!(q.folded_pos, Some((1, _))))
            .count();
        let r0 = self
            .qubits
            .iter()
            .filter(|q| matches!(q.folded_pos, Some((0, _))))
            .count();
        (r0, r1)
    }
}

/// Deterministic routing of every inter-column wire.
///
/// Wires between columns `c` and `c+1` nest around the fold between them.
/// Sorted by their anchor row, the upper half escapes over the top strip
/// edge, the lower half over the bottom, and a wire hops (bridges over) every
/// same-side wire between itself and its edge. Wires escaping the same side
/// of the same fold therefore pairwise cross.
pub(crate) struct WireRouting {
    /// Airbridge count per resonator index.
    pub crossings: Vec<u32>,
    /// Edge-index groups that pairwise cross: one group per (fold, side).
    pub crossing_groups: Vec<Vec<usize>>,
}

pub(crate) fn route_wires(layout: &PhysicalLayout) -> WireRouting {
    let pos_of: HashMap<u32, (u32, u32)> =
        layout.qubits.iter().map(|q| (q.id, q.grid_pos)).collect();

    // Group inter-column wires by the fold (smaller column) they wrap.
    let mut folds: HashMap<u32, Vec<(u32, u32, usize)>> = HashMap::new();
    for (idx, edge) in layout.resonators.iter().enumerate() {
        let (ra, ca) = pos_of[&edge.endpoints.0];
        let (rb, cb) = pos_of[&edge.endpoints.1];
        if ca != cb {
            let anchor = ra + rb;
            folds
                .entry(ca.min(cb))
                .or_default()
                .push((anchor, ra.min(rb), idx));
        }
    }

    let mut crossings = vec![0u32; layout.resonators.len()];
    let mut crossing_groups = Vec::new();
    let mut fold_cols: Vec<u32> = folds.keys().copied().collect();
    fold_cols.sort_unstable();
    for col in fold_cols {
        let mut wires = folds.remove(&col).unwrap();
        wires.sort_unstable();
        let n = wires.len();
        let top_count = n.div_ceil(2);
        let mut top = Vec::with_capacity(top_count);
        let mut bottom = Vec::with_capacity(n - top_count);
        for (rank, &(_, _, idx)) in wires.iter().enumerate() {
            if rank < top_count {
                crossings[idx] = rank as u32;
                top.push(idx);
            } else {
                crossings[idx] = (n - 1 - rank) as u32;
                bottom.push(idx);
            }
        }
        if top.len() > 1 {
            crossing_groups.push(top);
        }
        if bottom.len() > 1 {
            crossing_groups.push(bottom);
        }
    }

    WireRouting {
        crossings,
        crossing_groups,
    }
}

/// Fold the grid onto two rails and count airbridge crossings.
///
/// Even-indexed columns land on rail 0, odd-indexed on rail 1, each keeping
/// its internal row order. The coupling set is unchanged.
pub fn fold(layout: &PhysicalLayout) -> Result<PhysicalLayout, LayoutError> {
    if layout.qubits.is_empty() {
        return Err(LayoutError::EmptyLayout);
    }
    if layout.qubits.iter().any(|q| q.folded_pos.is_some()) {
        return Err(LayoutError::AlreadyFolded);
    }

    let mut folded = layout.clone();

    // Column-major scan so each column stacks contiguously on its rail.
    let mut order: Vec<usize> = (0..folded.qubits.len()).collect();
    order.sort_by_key(|&i| {
        let (r, c) = folded.qubits[i].grid_pos;
        (c, r)
    });
    let mut next_index = [0u32; 2];
    for i in order {
        let (_, col) = folded.qubits[i].grid_pos;
        let rail = (col % 2) as u8;
        folded.qubits[i].folded_pos = Some((rail, next_index[rail as usize]));
        next_index[rail as usize] += 1;
    }

    let routing = route_wires(&folded);
    for (edge, crossings) in folded.resonators.iter_mut().zip(routing.crossings) {
        edge.crossings = crossings;
    }

    Ok(folded)
}

/// Invert [`fold`]: clear rail positions and airbridge counts.
pub fn unfold(layout: &PhysicalLayout) -> Result<PhysicalLayout, LayoutError> {
    if !layout.is_folded() {
        return Err(LayoutError::NotFolded);
    }
    let mut prefold = layout.clone();
    for q in &mut prefold.qubits {
        q.folded_pos = None;
    }
    for e in &mut prefold.resonators {
        e.crossings = 0;
    }
    Ok(prefold)
}
