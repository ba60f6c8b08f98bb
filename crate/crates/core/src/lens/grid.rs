//! Discretized dual lens maps with bicubic Hermite interpolation, CSV
//! persistence, and the symplectic defect diagnostic.
//!
//! Nodes sit on a regular grid in `s` (periodic) and in the launch angle `chi`
//! of the inward velocity, which keeps the interpolated quantities (exit offset
//! and exit angle) smooth up to the tangency margin. Node derivatives are
//! fourth-order finite differences of node values, so a grid reloaded from its
//! CSV interpolates bit-identically.

use super::disc::{CertificationRecord, Direction, SimpleDisc};
use super::map::{ExactLens, TransitionMap};
use crate::error::{Error, Result};
use crate::geometry::FinslerMetric;
use crate::Vec2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{BufRead, Write};

/// Default distance of the angle grid from tangency.
pub const DEFAULT_CHI_MIN: f64 = 0.06;
/// Nodes whose `t` is this close to the admissible range are left out of defect statistics.
pub const TANGENCY_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensNode {
    pub s_in: f64,
    pub t_in: f64,
    pub s_out: f64,
    pub t_out: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Field {
    v: f64,
    ds: f64,
    dc: f64,
    dsc: f64,
}

#[derive(Debug, Clone)]
pub struct LensGrid {
    pub disc: SimpleDisc,
    pub n_s: usize,
    pub n_t: usize,
    pub chi_min: f64,
    pub nodes: Vec<LensNode>,
    /// Nodes excluded from the defect statistics (near tangency or failed).
    pub excluded: Vec<bool>,
    pub defect: f64,
    offset: Vec<Field>,
    angle: Vec<Field>,
}

fn d_periodic(f: &[f64], n_s: usize, n_t: usize, h: f64) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    for i in 0..n_s {
        let at = |k: isize| {
            f[((i as isize + k).rem_euclid(n_s as isize)) as usize * n_t..][..n_t].to_vec()
        };
        let (m2, m1, p1, p2) = (at(-2), at(-1), at(1), at(2));
        for j in 0..n_t {
            out[i * n_t + j] = (-p2[j] + 8.0 * p1[j] - 8.0 * m1[j] + m2[j]) / (12.0 * h);
        }
    }
    out
}

fn d_clamped(f: &[f64], n_s: usize, n_t: usize, h: f64) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    for i in 0..n_s {
        let row = &f[i * n_t..(i + 1) * n_t];
        for j in 0..n_t {
            let d = if j >= 2 && j + 2 < n_t {
                -row[j + 2] + 8.0 * row[j + 1] - 8.0 * row[j - 1] + row[j - 2]
            } else if j == 0 {
                -25.0 * row[0] + 48.0 * row[1] - 36.0 * row[2] + 16.0 * row[3] - 3.0 * row[4]
            } else if j == 1 {
                -3.0 * row[0] - 10.0 * row[1] + 18.0 * row[2] - 6.0 * row[3] + row[4]
            } else if j == n_t - 1 {
                let k = n_t - 1;
                25.0 * row[k] - 48.0 * row[k - 1] + 36.0 * row[k - 2] - 16.0 * row[k - 3]
                    + 3.0 * row[k - 4]
            } else {
                let k = n_t - 1;
                3.0 * row[k] + 10.0 * row[k - 1] - 18.0 * row[k - 2] + 6.0 * row[k - 3] - row[k - 4]
            };
            out[i * n_t + j] = d / (12.0 * h);
        }
    }
    out
}

fn hermite(a: f64) -> ([f64; 2], [f64; 2]) {
    let a2 = a * a;
    let a3 = a2 * a;
    (
        [2.0 * a3 - 3.0 * a2 + 1.0, -2.0 * a3 + 3.0 * a2],
        [a3 - 2.0 * a2 + a, a3 - a2],
    )
}

impl LensGrid {
    pub fn h_s(&self) -> f64 {
        self.disc.boundary_length() / self.n_s as f64
    }

    pub fn h_chi(&self) -> f64 {
        (PI - 2.0 * self.chi_min) / (self.n_t - 1) as f64
    }

    pub fn node_angle(&self, j: usize) -> f64 {
        self.chi_min + self.h_chi() * j as f64
    }

    fn from_nodes(
        disc: SimpleDisc,
        n_s: usize,
        n_t: usize,
        chi_min: f64,
        nodes: Vec<LensNode>,
        excluded: Vec<bool>,
    ) -> Result<Self> {
        let mut g = LensGrid {
            disc,
            n_s,
            n_t,
            chi_min,
            nodes,
            excluded,
            defect: 0.0,
            offset: vec![],
            angle: vec![],
        };
        let l = g.disc.boundary_length();
        let mut off = Vec::with_capacity(n_s * n_t);
        let mut ang = Vec::with_capacity(n_s * n_t);
        for (k, nd) in g.nodes.iter().enumerate() {
            let chi = g.node_angle(k % n_t);
            let mut d = (nd.s_out - nd.s_in).rem_euclid(l);
            if chi > 0.5 * PI && d < 0.25 * l {
                d += l;
            } else if chi < 0.5 * PI && d > 0.75 * l {
                d -= l;
            }
            off.push(d);
            ang.push(
                g.disc
                    .angle_from_t(nd.s_out, nd.t_out, Direction::Outward)?,
            );
        }
        let (hs, hc) = (g.h_s(), g.h_chi());
        let build = |f: &[f64]| {
            let ds = d_periodic(f, n_s, n_t, hs);
            let dc = d_clamped(f, n_s, n_t, hc);
            let dsc = d_periodic(&dc, n_s, n_t, hs);
            (0..f.len())
                .map(|k| Field {
                    v: f[k],
                    ds: ds[k],
                    dc: dc[k],
                    dsc: dsc[k],
                })
                .collect::<Vec<_>>()
        };
        g.offset = build(&off);
        g.angle = build(&ang);
        Ok(g)
    }

    fn eval_field(&self, f: &[Field], s: f64, chi: f64) -> f64 {
        let (hs, hc) = (self.h_s(), self.h_chi());
        let x = self.disc.wrap_s(s) / hs;
        let i0 = (x.floor() as usize).min(self.n_s - 1);
        let a = x - i0 as f64;
        let y = ((chi - self.chi_min) / hc).clamp(0.0, (self.n_t - 1) as f64);
        let j0 = (y.floor() as usize).min(self.n_t - 2);
        let b = y - j0 as f64;
        let (ha, ga) = hermite(a);
        let (hb, gb) = hermite(b);
        let mut acc = 0.0;
        for p in 0..2 {
            let i = (i0 + p) % self.n_s;
            for q in 0..2 {
                let c = &f[i * self.n_t + j0 + q];
                acc += ha[p] * hb[q] * c.v
                    + ga[p] * hs * hb[q] * c.ds
                    + ha[p] * gb[q] * hc * c.dc
                    + ga[p] * gb[q] * hs * hc * c.dsc;
            }
        }
        acc
    }

    /// Interpolated image in launch-angle form: `(s_out, chi_out)`.
    pub fn apply_angle(&self, s: f64, chi: f64) -> Result<(f64, f64)> {
        if !(chi >= self.chi_min && chi <= PI - self.chi_min) {
            return Err(Error::Domain(format!(
                "launch angle {chi} outside the grid"
            )));
        }
        let s = self.disc.wrap_s(s);
        let d = self.eval_field(&self.offset, s, chi);
        let c = self.eval_field(&self.angle, s, chi);
        Ok((self.disc.wrap_s(s + d), c))
    }

    /// Sample points `(s, t)` at cell centres not touching excluded nodes.
    pub fn cell_centres(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n_s {
            for j in 0..self.n_t - 1 {
                let touching = [
                    (i, j),
                    (i, j + 1),
                    ((i + 1) % self.n_s, j),
                    ((i + 1) % self.n_s, j + 1),
                ]
                .iter()
                .any(|&(a, b)| self.excluded[a * self.n_t + b]);
                if touching {
                    continue;
                }
                let s = (i as f64 + 0.5) * self.h_s();
                let chi = self.chi_min + (j as f64 + 0.5) * self.h_chi();
                out.push((s, self.disc.t_from_angle(s, chi, Direction::Inward)));
            }
        }
        out
    }

    pub fn write_csv(&self, w: &mut dyn Write) -> Result<()> {
        let to_json = |e: serde_json::Error| Error::Io(e.to_string());
        writeln!(w, "# family: {}", self.disc.metric.name())?;
        writeln!(
            w,
            "# metric: {}",
            serde_json::to_string(&self.disc.metric).map_err(to_json)?
        )?;
        writeln!(w, "# chart: {}", self.disc.chart)?;
        writeln!(
            w,
            "# center: {:.16e},{:.16e}",
            self.disc.center.x, self.disc.center.y
        )?;
        writeln!(w, "# radius: {:.16e}", self.disc.radius)?;
        writeln!(w, "# n_s: {}", self.n_s)?;
        writeln!(w, "# n_t: {}", self.n_t)?;
        writeln!(w, "# chi_min: {:.16e}", self.chi_min)?;
        writeln!(w, "# defect: {:.16e}", self.defect)?;
        if let Some(c) = &self.disc.certification {
            writeln!(
                w,
                "# certification: {}",
                serde_json::to_string(c).map_err(to_json)?
            )?;
        }
        let ex: Vec<String> = (0..self.nodes.len())
            .filter(|&k| self.excluded[k])
            .map(|k| k.to_string())
            .collect();
        writeln!(w, "# excluded: {}", ex.join(" "))?;
        writeln!(w, "s_in,t_in,s_out,t_out")?;
        for n in &self.nodes {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                n.s_in, n.t_in, n.s_out, n.t_out
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn read_csv(r: &mut dyn BufRead) -> Result<Self> {
        let mut meta = std::collections::HashMap::new();
        let mut nodes = Vec::new();
        for line in r.lines() {
            let line = line?;
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once(':') {
                    meta.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            if line.trim().is_empty() || line.starts_with("s_in") {
                continue;
            }
            let cols: Result<Vec<f64>> = line
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(e.to_string()))
                })
                .collect();
            let cols = cols?;
            if cols.len() != 4 {
                return Err(Error::Parse(format!("expected 4 columns in '{line}'")));
            }
            nodes.push(LensNode {
                s_in: cols[0],
                t_in: cols[1],
                s_out: cols[2],
                t_out: cols[3],
            });
        }
        let get = |k: &str| {
            meta.get(k)
                .ok_or_else(|| Error::Parse(format!("missing metadata '{k}'")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("{k}: {e}")))
        };
        let metric: FinslerMetric =
            serde_json::from_str(get("metric")?).map_err(|e| Error::Parse(e.to_string()))?;
        let (cx, cy) = get("center")?
            .split_once(',')
            .ok_or_else(|| Error::Parse("bad center".into()))?;
        let center = Vec2::new(
            cx.trim()
                .parse()
                .map_err(|_| Error::Parse("bad center".into()))?,
            cy.trim()
                .parse()
                .map_err(|_| Error::Parse("bad center".into()))?,
        );
        let chart = num("chart")? as u8;
        let mut disc = SimpleDisc::candidate(&metric, chart, center, num("radius")?)?;
        if let Some(c) = meta.get("certification") {
            let rec: CertificationRecord =
                serde_json::from_str(c).map_err(|e| Error::Parse(e.to_string()))?;
            disc.certification = Some(rec);
        }
        let n_s = num("n_s")? as usize;
        let n_t = num("n_t")? as usize;
        if nodes.len() != n_s * n_t {
            return Err(Error::Parse(format!(
                "expected {} rows, found {}",
                n_s * n_t,
                nodes.len()
            )));
        }
        let mut excluded = vec![false; nodes.len()];
        for k in get("excluded")?.split_whitespace() {
            let k: usize = k
                .parse()
                .map_err(|_| Error::Parse("bad excluded index".into()))?;
            if k < excluded.len() {
                excluded[k] = true;
            }
        }
        let mut g = Self::from_nodes(disc, n_s, n_t, num("chi_min")?, nodes, excluded)?;
        g.defect = num("defect")?;
        Ok(g)
    }
}

impl TransitionMap for LensGrid {
    fn disc(&self) -> &SimpleDisc {
        &self.disc
    }
    fn apply(&self, s: f64, t: f64) -> Result<(f64, f64)> {
        let s = self.disc.wrap_s(s);
        let chi = self.disc.angle_from_t(s, t, Direction::Inward)?;
        let (so, co) = self.apply_angle(s, chi)?;
        Ok((so, self.disc.t_from_angle(so, co, Direction::Outward)))
    }
    fn name(&self) -> String {
        format!("lens-grid({}x{})", self.n_s, self.n_t)
    }
}

/// Tabulate the lens map of a certified disc on an `n_s x n_t` grid.
pub fn build_lens_grid(disc: &SimpleDisc, n_s: usize, n_t: usize) -> Result<LensGrid> {
    build_lens_grid_with(disc, n_s, n_t, DEFAULT_CHI_MIN)
}

pub fn build_lens_grid_with(
    disc: &SimpleDisc,
    n_s: usize,
    n_t: usize,
    chi_min: f64,
) -> Result<LensGrid> {
    if !disc.is_certified() {
        return Err(Error::Precondition(
            "build_lens_grid needs a certified disc".into(),
        ));
    }
    if n_s < 16 || n_t < 16 {
        return Err(Error::Precondition(format!("grid {n_s}x{n_t} below 16x16")));
    }
    let lens = ExactLens::new(disc.clone());
    let l = disc.boundary_length();
    let h_chi = (PI - 2.0 * chi_min) / (n_t - 1) as f64;
    let results: Vec<(LensNode, bool, bool)> = (0..n_s * n_t)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n_t, k % n_t);
            let s = l * i as f64 / n_s as f64;
            let chi = chi_min + h_chi * j as f64;
            let t = disc.t_from_angle(s, chi, Direction::Inward);
            let (lo, hi) = disc.t_range(s);
            let near = t - lo < TANGENCY_MARGIN || hi - t < TANGENCY_MARGIN;
            match lens.apply(s, t) {
                Ok((so, to)) => (
                    LensNode {
                        s_in: s,
                        t_in: t,
                        s_out: so,
                        t_out: to,
                    },
                    near,
                    false,
                ),
                Err(_) => (
                    LensNode {
                        s_in: s,
                        t_in: t,
                        s_out: f64::NAN,
                        t_out: f64::NAN,
                    },
                    true,
                    true,
                ),
            }
        })
        .collect();
    let failed = results.iter().filter(|r| r.2).count();
    let excluded_count = results.iter().filter(|r| r.1).count();
    if excluded_count * 20 > results.len() {
        return Err(Error::Resolution(format!(
            "{excluded_count} of {} nodes excluded near tangency",
            results.len()
        )));
    }
    let mut nodes: Vec<LensNode> = results.iter().map(|r| r.0).collect();
    let excluded: Vec<bool> = results.iter().map(|r| r.1).collect();
    if failed > 0 {
        // failed nodes take the chord-geometry guess so that interpolation stays defined
        for (k, r) in results.iter().enumerate() {
            if r.2 {
                let chi = chi_min + h_chi * (k % n_t) as f64;
                let so = disc.wrap_s(r.0.s_in + 2.0 * disc.radius * chi);
                nodes[k].s_out = so;
                nodes[k].t_out = disc.t_from_angle(so, chi, Direction::Outward);
            }
        }
    }
    let mut g = LensGrid::from_nodes(disc.clone(), n_s, n_t, chi_min, nodes, excluded)?;
    let samples = g.cell_centres();
    g.defect = symplectic_defect(&g, &samples);
    Ok(g)
}

/// Largest `|det d(s_out, t_out)/d(s_in, t_in) - 1|` over the samples, by central differences.
pub fn symplectic_defect(map: &dyn TransitionMap, samples: &[(f64, f64)]) -> f64 {
    let disc = map.disc();
    let h = 1e-5;
    let per: Vec<f64> = samples
        .par_iter()
        .map(|&(s, t)| {
            let eval = |ds: f64, dt: f64| map.apply(disc.wrap_s(s + ds), t + dt);
            let (Ok(sp), Ok(sm), Ok(tp), Ok(tm)) =
                (eval(h, 0.0), eval(-h, 0.0), eval(0.0, h), eval(0.0, -h))
            else {
                return f64::NAN;
            };
            let a = disc.s_offset(sp.0, sm.0) / (2.0 * h);
            let c = (sp.1 - sm.1) / (2.0 * h);
            let b = disc.s_offset(tp.0, tm.0) / (2.0 * h);
            let d = (tp.1 - tm.1) / (2.0 * h);
            (a * d - b * c - 1.0).abs()
        })
        .collect();
    per.into_iter()
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
}

/// Regular `(s, chi)` sample grid converted to `(s, t)`, avoiding the tangency margin.
pub fn defect_samples(disc: &SimpleDisc, n: usize, chi_min: f64) -> Vec<(f64, f64)> {
    let l = disc.boundary_length();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let s = l * (i as f64 + 0.5) / n as f64;
            let chi = chi_min + (PI - 2.0 * chi_min) * (j as f64 + 0.5) / n as f64;
            out.push((s, disc.t_from_angle(s, chi, Direction::Inward)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lens::map::{euclidean_chord, Precomposed, Scale};
    use std::sync::Arc;

    #[test]
    fn euclidean_grid_is_symplectic_and_exact() {
        let disc =
            SimpleDisc::certified(&FinslerMetric::euclidean(), 0, Vec2::zeros(), 1.0).unwrap();
        let g = build_lens_grid(&disc, 32, 32).unwrap();
        assert!(g.defect <= 1e-6, "{}", g.defect);
        for (s, t) in [(0.3, 0.1), (4.0, -0.7), (6.2, 0.9)] {
            let (so, to) = g.apply(s, t).unwrap();
            let (es, et) = euclidean_chord(&disc, s, t);
            assert!(disc.s_offset(so, es).abs() < 1e-9 && (to - et).abs() < 1e-9);
        }
        let scaled = Precomposed {
            sigma: Arc::new(g.clone()),
            psi: Arc::new(Scale { factor: 1.0 / 1.01 }),
        };
        let d = symplectic_defect(&scaled, &defect_samples(&disc, 8, 0.2));
        assert!(d >= 9e-3, "{d}");
    }

    #[test]
    fn csv_reload_interpolates_bit_identically() {
        let m = FinslerMetric::katok(0.3).unwrap();
        let disc = SimpleDisc::certified(&m, 0, Vec2::new(0.1, 0.0), 0.3).unwrap();
        let g = build_lens_grid(&disc, 16, 16).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let back = LensGrid::read_csv(&mut std::io::Cursor::new(buf)).unwrap();
        for (s, t) in [(0.2, 0.0), (1.3, 0.4), (1.9, -0.3)] {
            assert_eq!(g.apply(s, t).unwrap(), back.apply(s, t).unwrap());
        }
        assert_eq!(g.defect, back.defect);
    }
}
