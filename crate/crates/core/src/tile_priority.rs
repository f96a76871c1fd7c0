//! Four-class tile priority assignment and the per-class weight counts
//! driving the bitrate allocator.
//!
//! Every tile of the grid gets exactly one class: tiles of the predicted
//! viewport are Top; tiles of object boxes that touch the predicted
//! viewport are TopMid; tiles of object boxes elsewhere are MidLow; the
//! rest are Low. The overlap test is evaluated per source box (see
//! [`crate::viewport_prediction::refine_viewport`]), so one box near the
//! viewport does not promote unrelated objects across the frame; a global
//! variant is available behind [`crate::viewport_prediction::OverlapMode::Global`]
//! in the refinement step.

use serde::{Deserialize, Serialize};

use crate::media_model::{TileGrid, TileSet};
use crate::{Error, Result};

/// Tile priority classes, ordered `Top > TopMid > MidLow > Low`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Priority {
    Low,
    MidLow,
    TopMid,
    Top,
}

impl Priority {
    pub const ALL_DESCENDING: [Priority; 4] =
        [Priority::Top, Priority::TopMid, Priority::MidLow, Priority::Low];

    /// Index into per-class arrays: Top = 0, TopMid = 1, MidLow = 2, Low = 3.
    pub fn class_index(self) -> usize {
        match self {
            Priority::Top => 0,
            Priority::TopMid => 1,
            Priority::MidLow => 2,
            Priority::Low => 3,
        }
    }

    pub fn from_class_index(idx: usize) -> Option<Priority> {
        Priority::ALL_DESCENDING.get(idx).copied()
    }

    /// Character used in debug dumps: T, M, L, `.`.
    pub fn glyph(self) -> char {
        match self {
            Priority::Top => 'T',
            Priority::TopMid => 'M',
            Priority::MidLow => 'L',
            Priority::Low => '.',
        }
    }
}

/// One priority per tile of the grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriorityMap {
    tiles: Vec<Priority>,
    cols: usize,
}

impl PriorityMap {
    pub fn priority(&self, tile: usize) -> Priority {
        self.tiles[tile]
    }

    pub fn tiles(&self) -> &[Priority] {
        &self.tiles
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    /// Tiles of one class, ascending.
    pub fn class_tiles(&self, p: Priority) -> Vec<usize> {
        self.tiles
            .iter()
            .enumerate()
            .filter(|(_, &t)| t == p)
            .map(|(i, _)| i)
            .collect()
    }

    /// Renders the map as a rows×cols character grid for visual diffing.
    pub fn debug_dump(&self) -> String {
        let mut out = String::new();
        for (i, p) in self.tiles.iter().enumerate() {
            out.push(p.glyph());
            if (i + 1) % self.cols == 0 {
                out.push('\n');
            }
        }
        out
    }
}

/// The per-class tile counts W = (w_top, w_top_mid, w_mid_low, w_low).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightMatrix {
    pub w_top: usize,
    pub w_top_mid: usize,
    pub w_mid_low: usize,
    pub w_low: usize,
}

impl WeightMatrix {
    pub fn total(&self) -> usize {
        self.w_top + self.w_top_mid + self.w_mid_low + self.w_low
    }

    pub fn count(&self, p: Priority) -> usize {
        match p {
            Priority::Top => self.w_top,
            Priority::TopMid => self.w_top_mid,
            Priority::MidLow => self.w_mid_low,
            Priority::Low => self.w_low,
        }
    }

    pub fn as_array(&self) -> [usize; 4] {
        [self.w_top, self.w_top_mid, self.w_mid_low, self.w_low]
    }
}

fn check_in_grid(set: &TileSet, grid: &TileGrid, name: &str) -> Result<()> {
    if let Some(max) = set.max_index() {
        if !grid.contains_index(max) {
            return Err(Error::InvalidInput(format!(
                "{name} holds tile {max}, outside the {}×{} grid",
                grid.rows(),
                grid.cols()
            )));
        }
    }
    Ok(())
}

/// Assigns every tile its priority class and counts the classes.
///
/// `viewport` is the predicted viewport tile set before object refinement;
/// `obj_overlapping` / `obj_disjoint` partition the object tiles by whether
/// their source box touches the viewport. Branches are checked highest
/// class first, so a tile claimed by several sets keeps the highest one.
pub fn classify_tiles(
    viewport: &TileSet,
    obj_overlapping: &TileSet,
    obj_disjoint: &TileSet,
    grid: &TileGrid,
) -> Result<(PriorityMap, WeightMatrix)> {
    check_in_grid(viewport, grid, "viewport set")?;
    check_in_grid(obj_overlapping, grid, "overlapping-object set")?;
    check_in_grid(obj_disjoint, grid, "disjoint-object set")?;

    let mut tiles = Vec::with_capacity(grid.tile_count());
    let mut w = WeightMatrix {
        w_top: 0,
        w_top_mid: 0,
        w_mid_low: 0,
        w_low: 0,
    };
    for t in 0..grid.tile_count() {
        let p = if viewport.contains(t) {
            w.w_top += 1;
            Priority::Top
        } else if obj_overlapping.contains(t) {
            w.w_top_mid += 1;
            Priority::TopMid
        } else if obj_disjoint.contains(t) {
            w.w_mid_low += 1;
            Priority::MidLow
        } else {
            w.w_low += 1;
            Priority::Low
        };
        tiles.push(p);
    }
    Ok((
        PriorityMap {
            tiles,
            cols: grid.cols(),
        },
        w,
    ))
}

/// Total download order: descending priority, ties broken by ascending
/// tile index. Stable and deterministic.
pub fn priority_order(pm: &PriorityMap) -> Vec<usize> {
    let mut order = Vec::with_capacity(pm.len());
    for p in Priority::ALL_DESCENDING {
        order.extend(pm.class_tiles(p));
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn grid8() -> TileGrid {
        TileGrid::default_8x8()
    }

    #[test]
    fn all_viewport_means_all_top() {
        let g = grid8();
        let (pm, w) = classify_tiles(&g.all_tiles(), &TileSet::new(), &TileSet::new(), &g).unwrap();
        assert_eq!(w.as_array(), [64, 0, 0, 0]);
        assert!(pm.tiles().iter().all(|&p| p == Priority::Top));
    }

    #[test]
    fn all_empty_means_all_low() {
        let g = grid8();
        let (_, w) =
            classify_tiles(&TileSet::new(), &TileSet::new(), &TileSet::new(), &g).unwrap();
        assert_eq!(w.as_array(), [0, 0, 0, 64]);
    }

    #[test]
    fn constructed_case_counts_12_3_4_45() {
        let g = grid8();
        // 12 viewport tiles, an overlapping box adding 3 new tiles, a
        // disjoint box covering 4 tiles elsewhere.
        let viewport: TileSet = (20..32).collect();
        let obj_overlapping: TileSet = [30, 31, 32, 33, 34].into_iter().collect(); // 3 new
        let obj_disjoint: TileSet = [50, 51, 52, 53].into_iter().collect();
        let (pm, w) = classify_tiles(&viewport, &obj_overlapping, &obj_disjoint, &g).unwrap();
        assert_eq!(w.as_array(), [12, 3, 4, 45]);
        assert_eq!(pm.class_tiles(Priority::Top).len(), 12);
        assert_eq!(pm.class_tiles(Priority::TopMid), vec![32, 33, 34]);
        assert_eq!(pm.class_tiles(Priority::MidLow), vec![50, 51, 52, 53]);

        // The priority order starts with the viewport tiles ascending.
        let order = priority_order(&pm);
        assert_eq!(&order[..12], (20..32).collect::<Vec<_>>().as_slice());
        assert_eq!(&order[12..15], &[32, 33, 34]);
    }

    #[test]
    fn viewport_always_wins_over_object_sets() {
        let g = grid8();
        let viewport: TileSet = [5].into_iter().collect();
        let both: TileSet = [5].into_iter().collect();
        let (pm, w) = classify_tiles(&viewport, &both, &both, &g).unwrap();
        assert_eq!(pm.priority(5), Priority::Top);
        assert_eq!(w.as_array(), [1, 0, 0, 63]);
    }

    #[test]
    fn out_of_grid_tile_is_invalid_input() {
        let g = grid8();
        let bad: TileSet = [64].into_iter().collect();
        assert!(classify_tiles(&bad, &TileSet::new(), &TileSet::new(), &g).is_err());
    }

    #[test]
    fn uniform_low_orders_by_index() {
        let g = grid8();
        let (pm, _) =
            classify_tiles(&TileSet::new(), &TileSet::new(), &TileSet::new(), &g).unwrap();
        assert_eq!(priority_order(&pm), (0..64).collect::<Vec<_>>());
    }

    #[test]
    fn single_top_tile_heads_the_order() {
        let g = grid8();
        let viewport: TileSet = [37].into_iter().collect();
        let (pm, _) = classify_tiles(&viewport, &TileSet::new(), &TileSet::new(), &g).unwrap();
        assert_eq!(priority_order(&pm)[0], 37);
    }

    fn random_set(rng: &mut StdRng, n: usize) -> TileSet {
        (0..n).filter(|_| rng.gen_bool(0.3)).collect()
    }

    #[test]
    fn partition_property_random() {
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..500 {
            let rows = rng.gen_range(1..=16);
            let cols = rng.gen_range(1..=16);
            let g = TileGrid::new(rows, cols, 160, 160).unwrap();
            let n = g.tile_count();
            let (pm, w) = classify_tiles(
                &random_set(&mut rng, n),
                &random_set(&mut rng, n),
                &random_set(&mut rng, n),
                &g,
            )
            .unwrap();
            assert_eq!(w.total(), n);
            for p in Priority::ALL_DESCENDING {
                assert_eq!(pm.class_tiles(p).len(), w.count(p));
            }
        }
    }

    #[test]
    fn adding_viewport_tile_never_lowers_any_priority() {
        let mut rng = StdRng::seed_from_u64(9);
        let g = grid8();
        for _ in 0..200 {
            let viewport = random_set(&mut rng, 64);
            let over = random_set(&mut rng, 64);
            let dis = random_set(&mut rng, 64);
            let (before, _) = classify_tiles(&viewport, &over, &dis, &g).unwrap();
            let extra = rng.gen_range(0..64);
            let mut grown = viewport.clone();
            grown.insert(extra);
            let (after, _) = classify_tiles(&grown, &over, &dis, &g).unwrap();
            for t in 0..64 {
                assert!(after.priority(t) >= before.priority(t), "tile {t}");
            }
        }
    }

    #[test]
    fn debug_dump_shape() {
        let g = grid8();
        let viewport: TileSet = [0, 1].into_iter().collect();
        let (pm, _) = classify_tiles(&viewport, &TileSet::new(), &TileSet::new(), &g).unwrap();
        let dump = pm.debug_dump();
        assert_eq!(dump.lines().count(), 8);
        assert!(dump.starts_with("TT......"));
    }
}
