//! TUM trajectory files: `timestamp tx ty tz qx qy qz qw` per line,
//! space-separated, `#` comment lines and blank lines skipped. Note the
//! quaternion is stored scalar-last on disk.

use std::path::Path;

use crate::error::{Error, Result};
use crate::pose::Pose;

/// One trajectory sample.
#[derive(Clone, Debug, PartialEq)]
pub struct TimedPose {
    pub timestamp: f64,
    pub pose: Pose,
}

/// Parses TUM trajectory text in file order.
pub fn parse_tum(text: &str) -> Result<Vec<TimedPose>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(Error::parse(
                "tum",
                line,
                format!("expected 8 fields, found {}", fields.len()),
            ));
        }
        let mut vals = [0.0f64; 8];
        for (v, field) in vals.iter_mut().zip(&fields) {
            *v = field
                .parse()
                .map_err(|_| Error::parse("tum", line, format!("invalid number `{field}`")))?;
        }
        let [ts, tx, ty, tz, qx, qy, qz, qw] = vals;
        let pose = Pose::new([tx, ty, tz], [qw, qx, qy, qz])
            .map_err(|e| Error::parse("tum", line, e.to_string()))?;
        out.push(TimedPose {
            timestamp: ts,
            pose,
        });
    }
    Ok(out)
}

/// Loads a TUM trajectory file.
pub fn load_tum(path: &Path) -> Result<Vec<TimedPose>> {
    parse_tum(&std::fs::read_to_string(path)?)
}

/// Strips timestamps, keeping trajectory order.
pub fn poses(trajectory: &[TimedPose]) -> Vec<Pose> {
    trajectory.iter().map(|t| t.pose.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const SAMPLE: &str = "\
# ground-truth trajectory
# timestamp tx ty tz qx qy qz qw

1305031102.1758 1.3405 0.6266 1.6575 0.6574 0.6126 -0.2949 -0.3248
1305031102.2758 0.0 0.0 0.0 0.0 0.0 0.0 1.0
";

    #[test]
    fn parses_comments_blanks_and_scalar_last_quaternions() {
        let traj = parse_tum(SAMPLE).unwrap();
        assert_eq!(traj.len(), 2);
        assert_abs_diff_eq!(traj[0].timestamp, 1305031102.1758, epsilon = 1e-6);
        assert_abs_diff_eq!(traj[0].pose.position().x, 1.3405, epsilon = 1e-12);
        // Second row is the identity: quaternion (x,y,z,w) = (0,0,0,1).
        assert_abs_diff_eq!(traj[1].pose.yaw(), 0.0, epsilon = 1e-12);
        assert_eq!(poses(&traj).len(), 2);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_tum("1.0 0 0 0 0 0 1\n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        let err = parse_tum("# ok\n1.0 0 0 0 0 0 0 zero\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        // Zero quaternion cannot normalize.
        let err = parse_tum("1.0 0 0 0 0 0 0 0\n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }
}
