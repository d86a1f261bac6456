use crate::em::EmModel;
use crate::line_search::ConstraintSpec;
use crate::spectral::QuadSurrogate;
use crate::{Matrix, ParamVec};

/// A [`QuadSurrogate`] exposed as an unconstrained EM model.
///
/// With an ML block the model also supports ECME: the ML-step maximizes the
/// quadratic exactly over the block's coordinates, holding the rest fixed.
#[derive(Debug, Clone)]
pub struct SurrogateModel {
    surrogate: QuadSurrogate,
    constraints: ConstraintSpec,
    ml_block: Option<MlBlock>,
    name: String,
}

#[derive(Debug, Clone)]
struct MlBlock {
    inside: Vec<usize>,
    outside: Vec<usize>,
    // -(I_obs[S,S])^{-1} I_obs[S,S^c]
    gain: Matrix,
}

impl SurrogateModel {
    pub fn new(surrogate: QuadSurrogate) -> Self {
        let name = format!("surrogate(p={})", surrogate.dim());
        Self {
            surrogate,
            constraints: ConstraintSpec::free(),
            ml_block: None,
            name,
        }
    }

    /// Enables an exact ML-step over the coordinates in `block`.
    pub fn with_ml_block(mut self, mut block: Vec<usize>) -> Self {
        let p = self.surrogate.dim();
        block.sort_unstable();
        block.dedup();
        assert!(block.iter().all(|&i| i < p), "ML block index out of range");
        let outside: Vec<usize> = (0..p).filter(|i| !block.contains(i)).collect();
        let io = self.surrogate.i_obs();
        let ss = io.select_rows(&block).select_columns(&block);
        let sc = io.select_rows(&block).select_columns(&outside);
        let gain = -ss
            .cholesky()
            .expect("principal block of a PD matrix is PD")
            .solve(&sc);
        self.ml_block = Some(MlBlock {
            inside: block,
            outside,
            gain,
        });
        self
    }

    pub fn surrogate(&self) -> &QuadSurrogate {
        &self.surrogate
    }
}

impl EmModel for SurrogateModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.surrogate.dim()
    }

    fn em_step(&self, theta: &ParamVec) -> ParamVec {
        self.surrogate
            .em_map(theta)
            .expect("dimension checked by caller")
    }

    fn loglik(&self, theta: &ParamVec) -> f64 {
        self.surrogate
            .loglik(theta)
            .expect("dimension checked by caller")
    }

    fn constraints(&self) -> &ConstraintSpec {
        &self.constraints
    }

    fn has_ml_step(&self) -> bool {
        self.ml_block.is_some()
    }

    fn ml_step(&self, theta: &ParamVec) -> Option<ParamVec> {
        let block = self.ml_block.as_ref()?;
        let hat = self.surrogate.theta_hat();
        let offset = ParamVec::from_iterator(
            block.outside.len(),
            block.outside.iter().map(|&j| theta[j] - hat[j]),
        );
        let inner = &block.gain * offset;
        let mut out = theta.clone();
        for (k, &i) in block.inside.iter().enumerate() {
            out[i] = hat[i] + inner[k];
        }
        Some(out)
    }
}
