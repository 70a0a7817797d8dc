//! Compares the analytic first-iteration weight steps of both networks with
//! central finite differences of the error.

use ewnn_cdpa::models::gradcheck::{first_step_gap, GapReport};
use ewnn_cdpa::models::ModelKind;

fn main() -> ewnn_cdpa::Result<()> {
    for model in [ModelKind::Benn, ModelKind::Ewnn] {
        let GapReport { w1, w2 } = first_step_gap(model, 8, 3, 8, 42)?;
        println!("{model:?}: relative gap dW1 {w1:.2e}, dW2 {w2:.2e}");
    }
    Ok(())
}
