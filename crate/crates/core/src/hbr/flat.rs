use crate::gait::{simulate_gait, ContactMask, DamageScenario, NUM_LEGS};
use crate::qd::{map_elites, metrics, Archive, ArchiveMetrics, EvalError, Evaluation, Evaluator, EvolutionConfig, Genotype, GridArchive, RunStats};
use crate::se2::Pose2;

use super::{arc_fitness, decode_legs, pose_of, Execution, HbrBounds, SkillLibrary, SKILL_DURATION, TOP_RESOLUTION};

/// Descriptor of a single-layer repertoire of 3 s gaits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlatVariant {
    /// Final (x, y).
    D2,
    /// Final (x, y) plus the six contact bits.
    D8,
}

impl FlatVariant {
    pub fn name(self) -> &'static str {
        match self {
            FlatVariant::D2 => "flat2d",
            FlatVariant::D8 => "flat8d",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "2d" | "flat2d" => Some(FlatVariant::D2),
            "8d" | "flat8d" => Some(FlatVariant::D8),
            _ => None,
        }
    }

    pub fn bd_dim(self) -> usize {
        match self {
            FlatVariant::D2 => 2,
            FlatVariant::D8 => 2 + NUM_LEGS,
        }
    }

    pub fn new_archive(self, b_top: f64) -> GridArchive<f64> {
        let mut bounds = vec![(-b_top, b_top); 2];
        let mut res = vec![TOP_RESOLUTION; 2];
        if self == FlatVariant::D8 {
            bounds.extend([(0.0, 1.0); NUM_LEGS]);
            res.extend([2; NUM_LEGS]);
        }
        GridArchive::new(bounds, res)
    }
}

/// Six leg controllers run together for 3 s.
pub struct FlatEval {
    pub variant: FlatVariant,
}

impl Evaluator<f64> for FlatEval {
    fn genome_len(&self) -> usize {
        6 * NUM_LEGS
    }

    fn evaluate(&self, g: &Genotype<f64>) -> Result<Evaluation<f64>, EvalError> {
        if g.len() != 6 * NUM_LEGS {
            return Err(EvalError::Invalid(format!("flat genotype has {} genes", g.len())));
        }
        let out = simulate_gait(&decode_legs(&g.0), &DamageScenario::none(), SKILL_DURATION).expect("whole periods");
        let d = out.displacement;
        let mut bd = vec![d.x, d.y];
        if self.variant == FlatVariant::D8 {
            bd.extend(out.mask.to_unit::<f64>());
        }
        Ok(Evaluation { bd, mask: Some(out.mask), fitness: arc_fitness(&d), outcome: vec![d.x, d.y, d.yaw] })
    }
}

#[derive(Debug, Clone)]
pub struct FlatRepertoire {
    pub variant: FlatVariant,
    pub b_top: f64,
    pub archive: GridArchive<f64>,
}

impl FlatRepertoire {
    pub fn train(variant: FlatVariant, cfg: &EvolutionConfig, bounds: &HbrBounds) -> (Self, RunStats) {
        let mut archive = variant.new_archive(bounds.b_top);
        let stats = map_elites(&FlatEval { variant }, cfg, &mut archive);
        (Self { variant, b_top: bounds.b_top, archive }, stats)
    }

    pub fn metrics(&self) -> ArchiveMetrics {
        let proj = crate::qd::Projection::square(self.b_top, TOP_RESOLUTION);
        metrics(&self.archive, Some(self.archive.capacity()), -std::f64::consts::PI, Some(&proj))
    }
}

impl SkillLibrary for FlatRepertoire {
    fn skill_count(&self) -> usize {
        self.archive.len()
    }

    fn skill_cell(&self, i: usize) -> usize {
        self.archive.cell_of_slot(i)
    }

    fn skill_prior(&self, i: usize) -> Pose2<f64> {
        pose_of(&self.archive.get(i).outcome)
    }

    fn skill_contacts(&self, i: usize) -> Option<ContactMask> {
        match self.variant {
            FlatVariant::D2 => None,
            FlatVariant::D8 => self.archive.get(i).mask,
        }
    }

    fn b_top(&self) -> f64 {
        self.b_top
    }

    fn has_secondary(&self) -> bool {
        false
    }

    fn execute(&self, i: usize, _mask: Option<ContactMask>, damage: &DamageScenario) -> Execution {
        let legs = decode_legs(&self.archive.get(i).genotype.0);
        let out = simulate_gait(&legs, damage, SKILL_DURATION).expect("whole periods");
        Execution { displacement: out.displacement, trajectory: out.trajectory, realized: vec![out.mask], fallbacks: 0 }
    }
}
