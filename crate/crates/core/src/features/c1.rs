use std::io::{self, Write};

use super::s1::S1Maps;
use crate::error::{Error, Result};

/// C1 layer: 2×2 non-overlapping max pooling of every S1 map. Odd edges
/// pool over the cells that exist.
#[derive(Debug, Clone, PartialEq)]
pub struct C1Maps {
    pub width: usize,
    pub height: usize,
    pub n_scales: usize,
    pub n_orientations: usize,
    /// Index `scale * n_orientations + orientation`, each `width * height`
    /// row-major.
    pub maps: Vec<Vec<f64>>,
}

pub fn pool_2x2(values: &[f64], width: usize, height: usize) -> Vec<f64> {
    let (w1, h1) = (width.div_ceil(2), height.div_ceil(2));
    let mut out = vec![f64::NEG_INFINITY; w1 * h1];
    for y in 0..height {
        for x in 0..width {
            let o = &mut out[(y / 2) * w1 + x / 2];
            *o = o.max(values[y * width + x]);
        }
    }
    out
}

impl C1Maps {
    /// Pools refreshed S1 maps. Fails when S1 cells have not been decayed to
    /// a common time.
    pub fn pool(s1: &S1Maps) -> Result<Self> {
        if !s1.is_refreshed() {
            return Err(Error::InvalidInput(
                "S1 maps must be refreshed to a common time before pooling".into(),
            ));
        }
        let g = s1.geometry();
        let (w, h) = (g.width as usize, g.height as usize);
        let maps = (0..s1.n_scales())
            .flat_map(|s| (0..s1.n_orientations()).map(move |o| (s, o)))
            .map(|(s, o)| pool_2x2(s1.map_values(s, o), w, h))
            .collect();
        Ok(Self {
            width: w.div_ceil(2),
            height: h.div_ceil(2),
            n_scales: s1.n_scales(),
            n_orientations: s1.n_orientations(),
            maps,
        })
    }

    pub fn map(&self, scale: usize, orientation: usize) -> &[f64] {
        &self.maps[scale * self.n_orientations + orientation]
    }

    pub fn cells_per_map(&self) -> usize {
        self.width * self.height
    }

    /// Every response across all maps.
    pub fn responses(&self) -> impl Iterator<Item = f64> + '_ {
        self.maps.iter().flatten().copied()
    }

    /// Debug dump: one `# scale=…,orientation=…` line per map followed by its
    /// grid rows.
    pub fn write_csv(&self, out: &mut impl Write, scales: &[usize], orientations_deg: &[f64]) -> io::Result<()> {
        for s in 0..self.n_scales {
            for o in 0..self.n_orientations {
                writeln!(out, "# scale={},orientation={}", scales[s], orientations_deg[o])?;
                for row in self.map(s, o).chunks(self.width) {
                    let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                    writeln!(out, "{}", line.join(","))?;
                }
            }
        }
        Ok(())
    }
}
