use super::model::CoarseDecoderModel;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::metrics::{chamfer_match, emd_approx_assignment, Assignment, AuctionOptions, AuctionState, LossType};
use crate::pointcloud::PointCloud;

fn unit(d: Vec3) -> Vec3 {
    let n = d.norm();
    if n > 0.0 {
        d / n
    } else {
        Vec3::zeros()
    }
}

fn add(flat: &mut [f64], i: usize, v: Vec3) {
    flat[3 * i] += v.x;
    flat[3 * i + 1] += v.y;
    flat[3 * i + 2] += v.z;
}

/// Chamfer value and its gradient w.r.t. the output points, holding the
/// nearest-neighbour correspondences fixed.
pub fn chamfer_output_gradient(out: &[Vec3], truth: &[Vec3]) -> Result<(f64, Vec<f64>)> {
    let m = chamfer_match(out, truth)?;
    let mut g = vec![0.0; 3 * out.len()];
    let (na, nb) = (out.len() as f64, truth.len() as f64);
    for (i, &j) in m.a_to_b.iter().enumerate() {
        add(&mut g, i, unit(out[i] - truth[j]) / na);
    }
    for (j, &i) in m.b_to_a.iter().enumerate() {
        add(&mut g, i, unit(out[i] - truth[j]) / nb);
    }
    Ok((m.value, g))
}

/// Mean matched distance under a fixed assignment and its gradient.
pub fn assignment_output_gradient(out: &[Vec3], truth: &[Vec3], asg: &Assignment) -> Result<(f64, Vec<f64>)> {
    if out.len() != truth.len() || asg.0.len() != out.len() {
        return Err(Error::SizeMismatch { left: out.len(), right: truth.len() });
    }
    let mut g = vec![0.0; 3 * out.len()];
    let n = out.len() as f64;
    for (i, &j) in asg.0.iter().enumerate() {
        add(&mut g, i, unit(out[i] - truth[j]) / n);
    }
    Ok((asg.cost(out, truth), g))
}

/// Loss of the model's output against `truth` and the parameter gradient.
pub fn loss_and_gradient(model: &CoarseDecoderModel, coarse: &PointCloud, truth: &PointCloud, loss: LossType) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; model.parameters().len()];
    let v = accumulate(model, coarse, truth, loss, &AuctionOptions::default(), &mut AuctionState::default(), 1.0, &mut grad)?;
    Ok((v, grad))
}

/// Adds `scale · dL/dθ` to `grad` and returns the loss.
#[allow(clippy::too_many_arguments)]
pub fn accumulate(
    model: &CoarseDecoderModel,
    coarse: &PointCloud,
    truth: &PointCloud,
    loss: LossType,
    emd: &AuctionOptions,
    state: &mut AuctionState,
    scale: f64,
    grad: &mut [f64],
) -> Result<f64> {
    let trace = model.trace(&coarse.points)?;
    if trace.output.iter().any(|v| !v.is_finite()) {
        return Ok(f64::NAN);
    }
    let out = PointCloud::from_flat(&trace.output).points;
    let (value, mut d_out) = match loss {
        LossType::Cd => chamfer_output_gradient(&out, &truth.points)?,
        LossType::Emd => {
            let (_, asg) = emd_approx_assignment(&out, &truth.points, emd, state)?;
            assignment_output_gradient(&out, &truth.points, &asg)?
        }
    };
    if scale != 1.0 {
        d_out.iter_mut().for_each(|d| *d *= scale);
    }
    model.backward(&trace, &d_out, grad);
    Ok(value)
}

/// Assignment loss with the matching held fixed (for gradient checks).
pub fn loss_with_assignment(model: &CoarseDecoderModel, coarse: &PointCloud, truth: &PointCloud, asg: &Assignment) -> Result<f64> {
    let out = model.forward(coarse)?;
    Ok(assignment_output_gradient(&out.points, &truth.points, asg)?.0)
}
