use super::{flat_index, sizes_of, Alphabet, Dist, Joint, Kernel};
use crate::{Error, Result};

/// One factor of a chain: a kernel from already-produced axes (`given`) to
/// freshly introduced axes (`out`).
///
/// A factor with an empty `given` list is an unconditional source. The usual
/// way to build factors is [`ChainFactor::source`] / [`ChainFactor::source_joint`]
/// for roots and [`ChainFactor::new`] for conditionals.
#[derive(Debug, Clone)]
pub struct ChainFactor {
    given: Vec<String>,
    out: Vec<String>,
    kernel: Kernel,
}

impl ChainFactor {
    pub fn new<S: Into<String>>(given: Vec<S>, out: Vec<S>, kernel: Kernel) -> Result<Self> {
        let given: Vec<String> = given.into_iter().map(Into::into).collect();
        let out: Vec<String> = out.into_iter().map(Into::into).collect();
        if kernel.from_axes().len() != given.len() {
            return Err(Error::ShapeMismatch(format!(
                "kernel conditions on {} axes but {} names were bound",
                kernel.from_axes().len(),
                given.len()
            )));
        }
        if kernel.to_axes().len() != out.len() {
            return Err(Error::ShapeMismatch(format!(
                "kernel produces {} axes but {} names were bound",
                kernel.to_axes().len(),
                out.len()
            )));
        }
        Ok(Self { given, out, kernel })
    }

    /// Root factor emitting one axis distributed as `dist`.
    pub fn source<S: Into<String>>(name: S, dist: &Dist) -> Self {
        Self {
            given: Vec::new(),
            out: vec![name.into()],
            kernel: Kernel::from_dist(dist),
        }
    }

    /// Root factor emitting all axes of `joint` at once (e.g. a correlated
    /// state pair).
    pub fn source_joint(joint: &Joint) -> Self {
        let out: Vec<String> = joint.axes().iter().map(|a| a.name().to_string()).collect();
        let alphabets: Vec<Alphabet> = joint.axes().iter().map(|a| a.alphabet().clone()).collect();
        let kernel = Kernel::new(Vec::new(), alphabets, vec![joint.flat_values().to_vec()])
            .expect("a valid joint flattens to a valid source row");
        Self {
            given: Vec::new(),
            out,
            kernel,
        }
    }

    pub fn given(&self) -> &[String] {
        &self.given
    }

    pub fn out(&self) -> &[String] {
        &self.out
    }
}

/// Compose an ordered list of factors into the joint pmf over every axis
/// they introduce, in order of introduction.
///
/// Each factor may only condition on axes produced by earlier factors, so a
/// name that is missing (or bound later — there is no way to forward- or
/// self-reference) surfaces as [`Error::UnknownAxis`]. Output mass is 1
/// within the construction tolerance because every row of every kernel is a
/// validated pmf.
pub fn chain_join(factors: &[ChainFactor]) -> Result<Joint> {
    let mut acc = Joint::scalar_unit();
    for factor in factors {
        acc = extend(&acc, factor)?;
    }
    Ok(acc)
}

fn extend(acc: &Joint, factor: &ChainFactor) -> Result<Joint> {
    // Bind conditioning axes against what has been produced so far.
    let mut given_pos = Vec::with_capacity(factor.given.len());
    for (k, name) in factor.given.iter().enumerate() {
        let pos = acc.axis_index(name)?;
        if !factor.kernel.from_axes()[k].compatible(acc.axes()[pos].alphabet()) {
            return Err(Error::ShapeMismatch(format!(
                "axis `{name}`: kernel expects {} symbols, chain has {}",
                factor.kernel.from_axes()[k].size(),
                acc.axes()[pos].alphabet().size()
            )));
        }
        given_pos.push(pos);
    }
    for name in &factor.out {
        if acc.axis_index(name).is_ok() {
            return Err(Error::DuplicateAxis(name.clone()));
        }
    }

    let old_shape = acc.shape().to_vec();
    let old_flat = acc.flat_values();
    let given_sizes = sizes_of(factor.kernel.from_axes());
    let n_out = factor.kernel.n_cols();
    let mut new_flat = vec![0.0; old_flat.len() * n_out];
    let mut idx = vec![0usize; old_shape.len()];
    let mut given_idx = vec![0usize; given_pos.len()];
    for (flat, &mass) in old_flat.iter().enumerate() {
        if mass != 0.0 {
            for (k, &p) in given_pos.iter().enumerate() {
                given_idx[k] = idx[p];
            }
            let row = flat_index(&given_sizes, &given_idx);
            let base = flat * n_out;
            for (c, &t) in factor.kernel.row(row).iter().enumerate() {
                new_flat[base + c] = mass * t;
            }
        }
        for ax in (0..old_shape.len()).rev() {
            idx[ax] += 1;
            if idx[ax] < old_shape[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }

    let mut axes: Vec<(String, Alphabet)> = acc
        .axes()
        .iter()
        .map(|a| (a.name().to_string(), a.alphabet().clone()))
        .collect();
    for (name, alphabet) in factor.out.iter().zip(factor.kernel.to_axes()) {
        axes.push((name.clone(), alphabet.clone()));
    }
    Joint::from_flat(axes, new_flat)
}
