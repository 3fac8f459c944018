use crate::gait::{simulate_gait, simulate_leg, DamageScenario, LegGenotype, NUM_LEGS};
use crate::qd::{Archive, EvalError, Evaluation, Evaluator, Genotype, ThresholdArchive};
use crate::se2::Pose2;

use super::{arc_fitness, pose_of, MiddleBank, SEGMENTS, SEGMENT_DURATION};

/// Reads 36 genes as six leg controllers.
pub fn decode_legs(genes: &[f64]) -> [LegGenotype<f64>; NUM_LEGS] {
    assert_eq!(genes.len(), 6 * NUM_LEGS, "flat genotype has 36 genes");
    std::array::from_fn(|i| LegGenotype::from_slice(&genes[6 * i..6 * i + 6]))
}

/// Looks up the bottom controller nearest to each of the six gene triples.
pub(crate) fn resolve_legs(bottom: &ThresholdArchive<f64>, genes: &[f64]) -> Result<[LegGenotype<f64>; NUM_LEGS], EvalError> {
    let mut legs = [LegGenotype::default(); NUM_LEGS];
    for (leg, q) in legs.iter_mut().zip(genes.chunks_exact(3)) {
        // genes are already coordinates in the normalised descriptor space
        let (slot, _) = bottom.index().nearest(q).ok_or_else(|| EvalError::Lookup("bottom layer is empty".into()))?;
        *leg = LegGenotype::from_slice(&bottom.get(slot).genotype.0);
    }
    Ok(legs)
}

/// Single-leg controllers.
pub struct BottomEval;

impl Evaluator<f64> for BottomEval {
    fn genome_len(&self) -> usize {
        6
    }

    fn evaluate(&self, g: &Genotype<f64>) -> Result<Evaluation<f64>, EvalError> {
        let (bd, fitness) = simulate_leg(&LegGenotype::from_slice(&g.0));
        let bd = bd.to_array().to_vec();
        Ok(Evaluation { outcome: bd.clone(), bd, mask: None, fitness })
    }
}

/// 1 s gaits over six bottom controllers.
pub struct MiddleEval<'a> {
    pub bottom: &'a ThresholdArchive<f64>,
}

impl MiddleEval<'_> {
    pub fn run(&self, g: &Genotype<f64>) -> Result<Evaluation<f64>, EvalError> {
        if g.len() != 3 * NUM_LEGS {
            return Err(EvalError::Invalid(format!("middle genotype has {} genes", g.len())));
        }
        let legs = resolve_legs(self.bottom, &g.0)?;
        let out = simulate_gait(&legs, &DamageScenario::none(), SEGMENT_DURATION).expect("one period");
        let d = out.displacement;
        let mut outcome = vec![d.x, d.y, d.yaw];
        outcome.extend_from_slice(&out.contact_fractions);
        Ok(Evaluation { bd: vec![d.x, d.y, d.yaw], mask: Some(out.mask), fitness: arc_fitness(&d), outcome })
    }
}

impl Evaluator<f64> for MiddleEval<'_> {
    fn genome_len(&self) -> usize {
        3 * NUM_LEGS
    }

    fn evaluate(&self, g: &Genotype<f64>) -> Result<Evaluation<f64>, EvalError> {
        self.run(g)
    }
}

/// 3 s skills chaining three middle gaits, looked up without regard to mask.
///
/// Gaits start from rest, so the displacement of the chain is the
/// composition of the recorded 1 s displacements.
pub struct TopEval<'a> {
    pub middle: &'a MiddleBank,
}

impl TopEval<'_> {
    pub fn run(&self, g: &Genotype<f64>) -> Result<Evaluation<f64>, EvalError> {
        if g.len() != 3 * SEGMENTS {
            return Err(EvalError::Invalid(format!("top genotype has {} genes", g.len())));
        }
        let mut pose = Pose2::identity();
        let mut masks = [0.0; SEGMENTS];
        for (k, q) in g.0.chunks_exact(3).enumerate() {
            let (pos, _) = self.middle.nearest(q, None).ok_or_else(|| EvalError::Lookup("middle layer is empty".into()))?;
            pose = pose.compose(&pose_of(&self.middle.get(pos).bd));
            masks[k] = self.middle.mask_of(pos).index() as f64;
        }
        let mut outcome = vec![pose.x, pose.y, pose.yaw];
        outcome.extend_from_slice(&masks);
        Ok(Evaluation { bd: vec![pose.x, pose.y], mask: None, fitness: arc_fitness(&pose), outcome })
    }
}

impl Evaluator<f64> for TopEval<'_> {
    fn genome_len(&self) -> usize {
        3 * SEGMENTS
    }

    fn evaluate(&self, g: &Genotype<f64>) -> Result<Evaluation<f64>, EvalError> {
        self.run(g)
    }
}
