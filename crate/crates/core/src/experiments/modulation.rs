//! Re-execution of every top skill under each of the 64 contact masks on the
//! intact robot.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::gait::{ContactMask, DamageScenario};
use crate::hbr::{Hbr, MaskChoice};
use crate::qd::Archive;

use super::stats::median;
use super::svg::{color, Panel, Svg};

/// Skills closer to the origin than this fraction of `b_top` are central.
pub const CENTER_FRACTION: f64 = 0.3;
/// Skills beyond this fraction of `b_top` are peripheral.
pub const EDGE_FRACTION: f64 = 0.8;
/// Skills with a shorter displacement are treated as standing still.
pub const MOVING_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct MaskRun {
    pub mask: ContactMask,
    /// Every segment realised the requested mask.
    pub valid: bool,
    pub fallbacks: usize,
    pub end: [f64; 2],
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkillModulation {
    pub slot: usize,
    pub cell: usize,
    pub bd: [f64; 2],
    pub runs: Vec<MaskRun>,
    pub training_valid: bool,
    pub training_error: f64,
}

impl SkillModulation {
    pub fn valid_count(&self) -> usize {
        self.runs.iter().filter(|r| r.valid).count()
    }

    /// Median endpoint error over valid masks.
    pub fn median_error(&self) -> Option<f64> {
        let e: Vec<f64> = self.runs.iter().filter(|r| r.valid).map(|r| r.error).collect();
        median(&e)
    }

    pub fn norm(&self) -> f64 {
        self.bd[0].hypot(self.bd[1])
    }
}

fn run(h: &Hbr, slot: usize, choice: MaskChoice, bd: [f64; 2]) -> (Vec<ContactMask>, usize, [f64; 2], f64) {
    let e = h.execute_skill(slot, choice, &DamageScenario::none());
    let end = [e.displacement.x, e.displacement.y];
    let err = (end[0] - bd[0]).hypot(end[1] - bd[1]);
    (e.realized, e.fallbacks, end, err)
}

pub fn modulate(h: &Hbr) -> Vec<SkillModulation> {
    (0..h.top.len())
        .into_par_iter()
        .map(|slot| {
            let e = h.top.get(slot);
            let bd = [e.bd[0], e.bd[1]];
            let runs = ContactMask::all()
                .map(|m| {
                    let (realized, fallbacks, end, error) = run(h, slot, MaskChoice::Same(m), bd);
                    MaskRun { mask: m, valid: realized.iter().all(|&r| r == m), fallbacks, end, error }
                })
                .collect();
            let training = h.training_masks(slot);
            let (realized, _, _, training_error) = run(h, slot, MaskChoice::PerSegment(training), bd);
            SkillModulation {
                slot,
                cell: h.top.cell_of_slot(slot),
                bd,
                runs,
                training_valid: realized[..] == training[..],
                training_error,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulationSummary {
    pub skills: usize,
    pub training_valid_fraction: f64,
    pub training_max_error: f64,
    pub moving_skills: usize,
    /// Moving skills for which the all-zero mask was realised.
    pub zero_mask_realized: usize,
    pub center_skills: usize,
    pub edge_skills: usize,
    pub center_median_valid: Option<usize>,
    pub edge_median_valid: Option<usize>,
}

impl ModulationSummary {
    pub fn new(mods: &[SkillModulation], b_top: f64) -> Self {
        let n = mods.len();
        let moving: Vec<&SkillModulation> = mods.iter().filter(|m| m.norm() > MOVING_THRESHOLD).collect();
        let zero = ContactMask::from_index(0);
        let center: Vec<usize> = mods.iter().filter(|m| m.norm() <= CENTER_FRACTION * b_top).map(|m| m.valid_count()).collect();
        let edge: Vec<usize> = mods.iter().filter(|m| m.norm() >= EDGE_FRACTION * b_top).map(|m| m.valid_count()).collect();
        Self {
            skills: n,
            training_valid_fraction: if n == 0 { 0.0 } else { mods.iter().filter(|m| m.training_valid).count() as f64 / n as f64 },
            training_max_error: mods.iter().map(|m| m.training_error).fold(0.0, f64::max),
            moving_skills: moving.len(),
            zero_mask_realized: moving.iter().filter(|m| m.runs.iter().any(|r| r.mask == zero && r.valid)).count(),
            center_skills: center.len(),
            edge_skills: edge.len(),
            center_median_valid: median(&center),
            edge_median_valid: median(&edge),
        }
    }

    pub fn to_text(&self) -> String {
        let opt = |v: Option<usize>| v.map_or("none".to_string(), |x| x.to_string());
        format!(
            "skills={}\ntraining_valid_fraction={}\ntraining_max_error={:e}\nmoving_skills={}\nzero_mask_realized={}\ncenter_skills={}\nedge_skills={}\ncenter_median_valid={}\nedge_median_valid={}\n",
            self.skills,
            self.training_valid_fraction,
            self.training_max_error,
            self.moving_skills,
            self.zero_mask_realized,
            self.center_skills,
            self.edge_skills,
            opt(self.center_median_valid),
            opt(self.edge_median_valid)
        )
    }
}

/// One row per skill.
pub fn skills_csv(mods: &[SkillModulation]) -> String {
    let mut s = String::from("cell,bd_x,bd_y,valid_masks,median_error,training_valid,training_error\n");
    for m in mods {
        let med = m.median_error().map_or(String::new(), |e| e.to_string());
        let _ = writeln!(s, "{},{},{},{},{},{},{}", m.cell, m.bd[0], m.bd[1], m.valid_count(), med, m.training_valid as u8, m.training_error);
    }
    s
}

/// One row per valid (skill, mask) execution.
pub fn endpoints_csv(mods: &[SkillModulation]) -> String {
    let mut s = String::from("cell,mask,end_x,end_y,error\n");
    for m in mods {
        for r in m.runs.iter().filter(|r| r.valid) {
            let _ = writeln!(s, "{},{},{},{},{}", m.cell, r.mask, r.end[0], r.end[1], r.error);
        }
    }
    s
}

/// Crosses at each skill's descriptor sized by its valid-mask count and
/// coloured by median endpoint error.
pub fn counts_svg(mods: &[SkillModulation], b_top: f64) -> String {
    let panel = Panel { x0: 60.0, y0: 20.0, size: 500.0, xr: (-b_top, b_top), yr: (-b_top, b_top) };
    let mut svg = Svg::new(620.0, 580.0);
    panel.axes(&mut svg, "x", "y", true);
    let emax = mods.iter().filter_map(|m| m.median_error()).fold(0.0, f64::max);
    for m in mods {
        let k = m.valid_count();
        if k == 0 {
            continue;
        }
        let t = m.median_error().map_or(0.0, |e| if emax > 0.0 { e / emax } else { 0.0 });
        svg.cross(panel.px(m.bd[0]), panel.py(m.bd[1]), 0.5 + 4.0 * k as f64 / 64.0, &color(t));
    }
    svg.finish()
}

/// 8×8 panels, one per mask, with the endpoints of valid executions. Mask
/// index = row·8 + column.
pub fn mask_grid_svg(mods: &[SkillModulation], b_top: f64) -> String {
    let size = 90.0;
    let gap = 20.0;
    let mut svg = Svg::new(8.0 * (size + gap) + gap, 8.0 * (size + gap) + gap);
    for mi in 0..64 {
        let (row, col) = (mi / 8, mi % 8);
        let panel = Panel {
            x0: gap + col as f64 * (size + gap),
            y0: gap + row as f64 * (size + gap),
            size,
            xr: (-b_top, b_top),
            yr: (-b_top, b_top),
        };
        panel.axes(&mut svg, "", "", false);
        let mask = ContactMask::from_index(mi);
        svg.text(panel.x0 + size / 2.0, panel.y0 - 4.0, 9.0, "middle", &mask.to_string());
        for m in mods {
            let r = &m.runs[mi];
            if r.valid {
                svg.circle(panel.px(r.end[0]), panel.py(r.end[1]), 0.8, "#21918c");
            }
        }
    }
    svg.finish()
}
