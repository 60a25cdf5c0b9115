//! Design, calibrate, and search top-k selection policies that trade the
//! expected performance of the admitted cohort against demographic disparity.
//!
//! The library models a selection round in which every candidate carries a
//! vector of input scores and one or more binary sensitive attributes. A
//! policy maps scores (and, for affirmative-action variants, attributes) to
//! an admit/reject decision, and is *calibrated* when it admits exactly a
//! target fraction `theta` of the population.
//!
//! Three policy families are provided:
//!
//! * [`Policy::Coefficients`] — threshold a normalized linear combination
//!   `w·x` of the input scores.
//! * [`Policy::Bonus`] — same, but members of a designated group receive an
//!   additive score bonus before thresholding.
//! * [`Policy::Quota`] — per-group thresholds forcing a fraction `q` of the
//!   admits to come from the designated group.
//!
//! On top of these, [`search`] implements coefficient rotation, grid search
//! over bonus values with binary-search threshold calibration, a greedy
//! multi-attribute bonus search, and exact Bonus↔Quota conversion.
//! [`baselines`] provides quantile distribution repair and prefix-fair
//! re-ranking for comparison.
//!
//! ```
//! use std::collections::BTreeMap;
//! use fairsel::{calibrate_topk, evaluate, Candidate, Population};
//! use fairsel::{OutcomeModel, PolicyForm, WeightVector};
//!
//! // Six candidates, one score, one binary attribute.
//! let candidates = [(1, true, 10.0), (2, true, 20.0), (3, true, 30.0),
//!                   (4, false, 40.0), (5, false, 50.0), (6, false, 60.0)]
//!     .map(|(id, in_group, x)| Candidate {
//!         id,
//!         attrs: BTreeMap::from([("g".to_string(), in_group)]),
//!         scores: vec![x],
//!         outcome: None,
//!     });
//! let pop = Population::new(candidates.to_vec(), vec!["g".into()], vec!["x".into()])?;
//!
//! // Admit the top half by raw score and price disparity at lambda = 10.
//! let weights = WeightVector::new(vec![1.0])?;
//! let cal = calibrate_topk(&PolicyForm::coefficients(weights.clone()), &pop, 0.5)?;
//! let model = OutcomeModel { alpha0: 0.0, alpha: 1.0, weights };
//! let lambda = BTreeMap::from([("g".to_string(), 10.0)]);
//! let report = evaluate(&cal.selection, &pop, &model, &lambda)?;
//!
//! assert_eq!(cal.selection.k(), 3);
//! assert_eq!(report.uos, 50.0);              // mean of 40, 50, 60
//! assert_eq!(report.dmd["g"], -1.0);         // nobody admitted from g
//! assert_eq!(report.objective, 40.0);        // 50 - 10 * |-1|
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod baselines;
pub mod fit;
pub mod fmt;
pub mod metrics;
pub mod model;
pub mod policies;
pub mod search;

pub use fit::{fit_outcome_model, generate_population, FitOutcome, GeneratorConfig, OutcomeModel};
pub use metrics::{evaluate, EvalReport};
pub use model::{Candidate, EmpiricalDist, Population};
pub use policies::{
    admit, calibrate_bonus_binary_search, calibrate_topk, target_count, BonusTerm,
    CalibratedPolicy, Policy, PolicyForm, Selection, WeightVector,
};
