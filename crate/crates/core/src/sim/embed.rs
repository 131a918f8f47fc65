use super::SimError;
use crate::trajectory::{angle_delta, normalize_heading, EmbeddedTemplate, Sample, Trajectory};

/// Splices `template` into `base` starting at the base sample nearest to
/// `t_start`.
///
/// The template replaces as many base samples as it has (after resampling
/// to the base period when the periods differ), translated so its first
/// position coincides with the replaced base sample. The rest of the base
/// is rotated about the splice end by the heading difference and
/// translated onto the template's last position, so positions stay
/// continuous and later velocities keep pointing along the path.
pub fn embed_template(base: &Trajectory, name: &str, template: &Trajectory, t_start: f64) -> Result<Trajectory, SimError> {
    let dt = base.native_period();
    let template = if (template.native_period() - dt).abs() > 1e-9 * dt {
        template.resample(dt)?
    } else {
        template.clone()
    };
    let b = base.samples();
    let tm = template.samples();
    if !(t_start >= base.t_first() - 0.5 * dt && t_start <= base.t_last()) {
        return Err(SimError::DoesNotFit(format!("t_start {t_start} outside the base")));
    }
    let i0 = b
        .iter()
        .enumerate()
        .min_by(|x, y| (x.1.t - t_start).abs().total_cmp(&(y.1.t - t_start).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let i1 = i0 + tm.len() - 1;
    if i1 >= b.len() {
        return Err(SimError::DoesNotFit(format!(
            "template spans {} s but only {} s remain after {}",
            template.duration(),
            base.t_last() - b[i0].t,
            b[i0].t
        )));
    }
    let (ts, te) = (b[i0].t, b[i1].t);
    if let Some(e) = base.embedded().iter().find(|e| e.t_start < te && ts < e.t_end) {
        return Err(SimError::DoesNotFit(format!("overlaps embedded `{}`", e.name)));
    }

    let anchor = b[i0];
    let t0 = tm[0];
    let mut out: Vec<Sample> = b[..i0].to_vec();
    out.extend(tm.iter().enumerate().map(|(j, p)| Sample {
        t: b[i0 + j].t,
        x_east: anchor.x_east + (p.x_east - t0.x_east),
        y_north: anchor.y_north + (p.y_north - t0.y_north),
        z_up: anchor.z_up + (p.z_up - t0.z_up),
        ..*p
    }));

    let end = *out.last().expect("template has samples");
    let pivot = b[i1];
    let delta = angle_delta(pivot.heading, end.heading);
    let (sin, cos) = delta.to_radians().sin_cos();
    // heading is clockwise from north, so a heading increase turns (e, n) clockwise
    let rot = |e: f64, n: f64| (e * cos + n * sin, -e * sin + n * cos);
    for p in &b[i1 + 1..] {
        let (de, dn) = rot(p.x_east - pivot.x_east, p.y_north - pivot.y_north);
        let (vx, vy) = rot(p.vx, p.vy);
        out.push(Sample {
            x_east: end.x_east + de,
            y_north: end.y_north + dn,
            z_up: end.z_up + (p.z_up - pivot.z_up),
            vx,
            vy,
            heading: normalize_heading(p.heading + delta),
            ..*p
        });
    }
    if let Some(p) = out.iter().find(|p| p.z_up < 0.0) {
        return Err(SimError::DoesNotFit(format!("splice takes altitude below ground at t = {}", p.t)));
    }

    let mut embedded = base.embedded().to_vec();
    embedded.push(EmbeddedTemplate {
        name: name.to_string(),
        t_start: ts,
        t_end: te,
    });
    embedded.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));
    let tr = Trajectory::new(base.sortie_id(), out)?.with_embedded(embedded);
    Ok(match base.source() {
        Some(p) => tr.with_source(p),
        None => tr,
    })
}
