//! Simulated classifier: correct with the class's accuracy, otherwise a
//! uniformly random wrong class — the same error model under which the
//! ensemble accuracy is derived.

use rand::Rng;

use crate::classes::{ClassId, ClassModel, ModelError};

pub fn classifier_sample(
    true_class: ClassId,
    model: &ClassModel,
    rng: &mut impl Rng,
) -> Result<ClassId, ModelError> {
    let p = model.accuracy(true_class)?;
    if rng.gen_bool(p) {
        return Ok(true_class);
    }
    let c = model.class_count() as usize;
    let pick = rng.gen_range(0..c - 1);
    let wrong = if pick >= true_class.index() { pick + 1 } else { pick };
    Ok(ClassId::from_index(wrong))
}
