//! Padded Cartesian grid, flattened indexing, scenario initialization and
//! snapshot/config file formats.

use crate::error::{Error, Result};
use crate::H_EPS;
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

/// Interior grid dimensions and geometry. Padded extents are `(n_x+2, n_y+2)`,
/// one halo cell deep on every side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n_x: usize,
    pub n_y: usize,
    /// Cell size [m], uniform in x and y.
    pub dx: f64,
    /// Physical coordinates of the lower-left corner of the interior region.
    pub origin: (f64, f64),
}

impl GridSpec {
    pub fn new(n_x: usize, n_y: usize, dx: f64, origin: (f64, f64)) -> Result<Self> {
        if n_x < 1 || n_y < 1 {
            return Err(Error::InvalidGrid(format!(
                "cell counts must be >= 1, got ({n_x},{n_y})"
            )));
        }
        if !(dx > 0.0) {
            return Err(Error::InvalidGrid(format!("dx must be > 0, got {dx}")));
        }
        Ok(Self { n_x, n_y, dx, origin })
    }

    /// Square domain of side `n_side*dx` centered at (0,0).
    pub fn centered_square(n_side: usize, dx: f64) -> Result<Self> {
        let half = n_side as f64 * dx / 2.0;
        Self::new(n_side, n_side, dx, (-half, -half))
    }

    /// Padded extent in x: interior plus one halo column per side.
    #[inline]
    pub fn padded_x(&self) -> usize {
        self.n_x + 2
    }

    #[inline]
    pub fn padded_y(&self) -> usize {
        self.n_y + 2
    }

    /// Total flattened array length `(n_x+2)*(n_y+2)`.
    #[inline]
    pub fn n_arr(&self) -> usize {
        self.padded_x() * self.padded_y()
    }

    /// Row-major flattened offset `k = j*(n_x+2) + i` over the padded grid.
    #[inline]
    pub fn flat_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.padded_x(), "column index {i} out of padded range");
        debug_assert!(j < self.padded_y(), "row index {j} out of padded range");
        j * self.padded_x() + i
    }

    /// Physical center of cell `(i,j)` in padded coordinates; interior cells
    /// are `i in [1, n_x]`, `j in [1, n_y]`. Halo cells extrapolate the same
    /// formula but never carry physics.
    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.0 + (i as f64 - 0.5) * self.dx,
            self.origin.1 + (j as f64 - 0.5) * self.dx,
        )
    }

    #[inline]
    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        i >= 1 && i <= self.n_x && j >= 1 && j <= self.n_y
    }
}

/// Conserved fields plus bathymetry on the padded grid, stored flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSet {
    pub h: Vec<f64>,
    pub hu: Vec<f64>,
    pub hv: Vec<f64>,
    pub z: Vec<f64>,
}

impl FieldSet {
    pub fn zeros(spec: &GridSpec) -> Self {
        let n = spec.n_arr();
        Self {
            h: vec![0.0; n],
            hu: vec![0.0; n],
            hv: vec![0.0; n],
            z: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    /// Interior water volume, `sum h * dx^2`, in row-major order.
    pub fn total_volume(&self, spec: &GridSpec) -> f64 {
        let mut v = 0.0;
        for j in 1..=spec.n_y {
            for i in 1..=spec.n_x {
                v += self.h[spec.flat_index(i, j)];
            }
        }
        v * spec.dx * spec.dx
    }

    /// Minimum interior depth.
    pub fn min_depth(&self, spec: &GridSpec) -> f64 {
        let mut m = f64::INFINITY;
        for j in 1..=spec.n_y {
            for i in 1..=spec.n_x {
                m = m.min(self.h[spec.flat_index(i, j)]);
            }
        }
        m
    }

    pub fn count_wet(&self, spec: &GridSpec) -> usize {
        let mut n = 0;
        for j in 1..=spec.n_y {
            for i in 1..=spec.n_x {
                if self.h[spec.flat_index(i, j)] > H_EPS {
                    n += 1;
                }
            }
        }
        n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioKind {
    CircularDamBreak,
    LakeAtRest,
    Dambreak1d,
    FromFile(String),
}

impl ScenarioKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "circular-dam-break" => Ok(Self::CircularDamBreak),
            "lake-at-rest" => Ok(Self::LakeAtRest),
            "dambreak-1d" => Ok(Self::Dambreak1d),
            other => {
                if let Some(path) = other.strip_prefix("from-file:") {
                    Ok(Self::FromFile(path.trim().to_string()))
                } else {
                    Err(Error::InvalidScenario(format!("unknown scenario kind '{other}'")))
                }
            }
        }
    }
}

/// Simulation scenario parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// Cells per side (square scenarios) or along x (1D dam break).
    pub n_side: usize,
    pub dx: f64,
    pub cfl: f64,
    pub t_end: f64,
    pub g: f64,
    /// Uniform net rain rate `r_o - r_f` [m/s].
    pub rain_rate: f64,
    /// Manning friction coefficient; 0 disables friction.
    pub manning_n: f64,
    /// Gaussian bump peak height for the lake-at-rest scenario.
    pub bump_height: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::CircularDamBreak,
            n_side: 100,
            dx: 0.5,
            cfl: 0.45,
            t_end: 1.0,
            g: 9.81,
            rain_rate: 0.0,
            manning_n: 0.0,
            bump_height: 0.2,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidScenario(format!(
                "cfl must be in (0,1], got {}",
                self.cfl
            )));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "t_end must be > 0, got {}",
                self.t_end
            )));
        }
        if !(self.g > 0.0) {
            return Err(Error::InvalidScenario(format!("g must be > 0, got {}", self.g)));
        }
        if self.rain_rate < 0.0 {
            return Err(Error::InvalidScenario(format!(
                "rain_rate must be >= 0, got {}",
                self.rain_rate
            )));
        }
        if self.n_side < 1 {
            return Err(Error::InvalidScenario("n_side must be >= 1".into()));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        match self.kind {
            ScenarioKind::Dambreak1d => {
                let half = self.n_side as f64 * self.dx / 2.0;
                GridSpec::new(self.n_side, 1, self.dx, (-half, -self.dx / 2.0))
            }
            _ => GridSpec::centered_square(self.n_side, self.dx),
        }
    }

    /// Build the initial fields for this scenario.
    pub fn initialize(&self, spec: &GridSpec) -> Result<FieldSet> {
        self.validate()?;
        match &self.kind {
            ScenarioKind::CircularDamBreak => init_circular_dam_break(spec, self),
            ScenarioKind::LakeAtRest => init_lake_at_rest(spec, self.bump_height),
            ScenarioKind::Dambreak1d => init_dambreak_1d(spec, 4.0, 1.0),
            ScenarioKind::FromFile(path) => {
                let (fspec, fields) = read_snapshot(Path::new(path))?;
                if fspec.n_x != spec.n_x || fspec.n_y != spec.n_y {
                    return Err(Error::InvalidScenario(format!(
                        "snapshot dims ({},{}) do not match grid ({},{})",
                        fspec.n_x, fspec.n_y, spec.n_x, spec.n_y
                    )));
                }
                Ok(fields)
            }
        }
    }
}

/// Circular dam break: `h = 4` inside radius `n_side*dx/5` from the domain
/// center, `h = 1` outside, at rest over a flat bed. Ties at the radius are
/// inside the dam. The domain must be square and centered at (0,0).
pub fn init_circular_dam_break(spec: &GridSpec, cfg: &ScenarioConfig) -> Result<FieldSet> {
    if spec.n_x != spec.n_y {
        return Err(Error::InvalidScenario(format!(
            "circular dam break needs a square domain, got ({},{})",
            spec.n_x, spec.n_y
        )));
    }
    let radius = spec.n_x as f64 * spec.dx / 5.0;
    let r2 = radius * radius;
    let mut f = FieldSet::zeros(spec);
    for j in 0..spec.padded_y() {
        for i in 0..spec.padded_x() {
            let (x, y) = spec.cell_center(i, j);
            let k = spec.flat_index(i, j);
            f.h[k] = if x * x + y * y <= r2 { 4.0 } else { 1.0 };
        }
    }
    let _ = cfg;
    Ok(f)
}

/// Lake at rest over a Gaussian bed bump centered in the domain: reference
/// surface level 1, `h = max(0, 1 - z)`, zero discharge.
pub fn init_lake_at_rest(spec: &GridSpec, bump_height: f64) -> Result<FieldSet> {
    if bump_height < 0.0 {
        return Err(Error::InvalidScenario(format!(
            "bump_height must be >= 0, got {bump_height}"
        )));
    }
    let eta_ref = 1.0;
    let lx = spec.n_x as f64 * spec.dx;
    let ly = spec.n_y as f64 * spec.dx;
    let (cx, cy) = (spec.origin.0 + lx / 2.0, spec.origin.1 + ly / 2.0);
    // Bump width scales with the domain so refinement keeps the same shape.
    let sigma = 0.15 * lx.min(ly);
    let mut f = FieldSet::zeros(spec);
    for j in 0..spec.padded_y() {
        for i in 0..spec.padded_x() {
            let (x, y) = spec.cell_center(i, j);
            let r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            let z = bump_height * (-r2 / (2.0 * sigma * sigma)).exp();
            let k = spec.flat_index(i, j);
            f.z[k] = z;
            f.h[k] = (eta_ref - z).max(0.0);
        }
    }
    Ok(f)
}

/// 1D dam break column: `h = h_left` for cell centers with `x < 0`,
/// `h = h_right` otherwise, at rest over a flat bed.
pub fn init_dambreak_1d(spec: &GridSpec, h_left: f64, h_right: f64) -> Result<FieldSet> {
    if h_left < 0.0 || h_right < 0.0 {
        return Err(Error::InvalidScenario("depths must be >= 0".into()));
    }
    let mut f = FieldSet::zeros(spec);
    for j in 0..spec.padded_y() {
        for i in 0..spec.padded_x() {
            let (x, _) = spec.cell_center(i, j);
            let k = spec.flat_index(i, j);
            f.h[k] = if x < 0.0 { h_left } else { h_right };
        }
    }
    Ok(f)
}

const SNAPSHOT_MAGIC: &[u8; 4] = b"SWE1";

/// Write a field snapshot: magic "SWE1", `n_x`/`n_y` as little-endian u64,
/// `dx`, origin x/y as little-endian f64, then the four padded arrays
/// h, hu, hv, z as little-endian f64.
pub fn write_snapshot(path: &Path, spec: &GridSpec, fields: &FieldSet) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&(spec.n_x as u64).to_le_bytes())?;
    w.write_all(&(spec.n_y as u64).to_le_bytes())?;
    w.write_all(&spec.dx.to_le_bytes())?;
    w.write_all(&spec.origin.0.to_le_bytes())?;
    w.write_all(&spec.origin.1.to_le_bytes())?;
    for arr in [&fields.h, &fields.hu, &fields.hv, &fields.z] {
        if arr.len() != spec.n_arr() {
            return Err(Error::SnapshotFormat(format!(
                "field length {} does not match padded grid {}",
                arr.len(),
                spec.n_arr()
            )));
        }
        for v in arr {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(GridSpec, FieldSet)> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::SnapshotFormat("bad magic, not an SWE1 snapshot".into()));
    }
    let mut b8 = [0u8; 8];
    let mut read_u64 = |r: &mut dyn Read| -> Result<u64> {
        r.read_exact(&mut b8)?;
        Ok(u64::from_le_bytes(b8))
    };
    let n_x = read_u64(&mut r)? as usize;
    let n_y = read_u64(&mut r)? as usize;
    let mut b8 = [0u8; 8];
    let mut read_f64 = |r: &mut dyn Read| -> Result<f64> {
        r.read_exact(&mut b8)?;
        Ok(f64::from_le_bytes(b8))
    };
    let dx = read_f64(&mut r)?;
    let x0 = read_f64(&mut r)?;
    let y0 = read_f64(&mut r)?;
    let spec = GridSpec::new(n_x, n_y, dx, (x0, y0))?;
    let n = spec.n_arr();
    let mut fields = FieldSet::zeros(&spec);
    for arr in [&mut fields.h, &mut fields.hu, &mut fields.hv, &mut fields.z] {
        let mut b = [0u8; 8];
        for v in arr.iter_mut() {
            r.read_exact(&mut b)?;
            *v = f64::from_le_bytes(b);
        }
        let _ = n;
    }
    Ok((spec, fields))
}

/// CSV export of the interior depth field, one row per j, for small grids.
pub fn write_csv(path: &Path, spec: &GridSpec, fields: &FieldSet) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "i,j,x,y,h,hu,hv,z")?;
    for j in 1..=spec.n_y {
        for i in 1..=spec.n_x {
            let (x, y) = spec.cell_center(i, j);
            let k = spec.flat_index(i, j);
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                i, j, x, y, fields.h[k], fields.hu[k], fields.hv[k], fields.z[k]
            )?;
        }
    }
    Ok(())
}

/// Flat `key = value` config file with optional `[section]` headers.
/// Blank lines and `#` comments are skipped. Keys are returned as
/// `section.key` (keys before any section header have no prefix).
pub fn parse_kv_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    parse_kv_text(&text)
}

pub fn parse_kv_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            section = line[1..line.len() - 1].trim().to_string();
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::ConfigParse(format!(
                "line {}: expected 'key = value', got '{raw}'",
                lineno + 1
            )));
        };
        let key = if section.is_empty() {
            k.trim().to_string()
        } else {
            format!("{section}.{}", k.trim())
        };
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

impl ScenarioConfig {
    /// Read scenario keys from a parsed key=value map (`scenario.` section).
    pub fn from_kv(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = Self::default();
        let get = |k: &str| map.get(&format!("scenario.{k}")).or_else(|| map.get(k));
        if let Some(v) = get("kind") {
            cfg.kind = ScenarioKind::parse(v)?;
        }
        macro_rules! num {
            ($field:ident, $key:expr, $ty:ty) => {
                if let Some(v) = get($key) {
                    cfg.$field = v.parse::<$ty>().map_err(|e| {
                        Error::ConfigParse(format!("bad value for {}: {e}", $key))
                    })?;
                }
            };
        }
        num!(n_side, "n_side", usize);
        num!(dx, "dx", f64);
        num!(cfl, "cfl", f64);
        num!(t_end, "t_end", f64);
        num!(g, "g", f64);
        num!(rain_rate, "rain_rate", f64);
        num!(manning_n, "manning_n", f64);
        num!(bump_height, "bump_height", f64);
        cfg.validate()?;
        Ok(cfg)
    }
}
