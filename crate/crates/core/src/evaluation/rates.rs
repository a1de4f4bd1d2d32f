use crate::error::{Error, Result};

/// Consecutive alarms needed before a detection counts.
pub const DEFAULT_RUN_LENGTH: usize = 3;

fn check_onset(alarms: &[bool], onset: usize) -> Result<()> {
    if onset >= alarms.len() {
        return Err(Error::InvalidConfig(format!(
            "onset {onset} must precede the end of a {}-sample sequence",
            alarms.len()
        )));
    }
    Ok(())
}

/// Percentage of post-onset samples that raise an alarm.
pub fn fdr(alarms: &[bool], onset: usize) -> Result<f64> {
    check_onset(alarms, onset)?;
    let hits = alarms[onset..].iter().filter(|&&a| a).count();
    Ok(100.0 * hits as f64 / (alarms.len() - onset) as f64)
}

/// Percentage of pre-onset samples that raise an alarm.
pub fn far(alarms: &[bool], onset: usize) -> Result<f64> {
    check_onset(alarms, onset)?;
    if onset == 0 {
        return Err(Error::InvalidConfig("FAR needs at least one fault-free sample".into()));
    }
    let hits = alarms[..onset].iter().filter(|&&a| a).count();
    Ok(100.0 * hits as f64 / onset as f64)
}

/// Samples from onset to the start of the first run of `run_length` alarms.
pub fn detection_delay(alarms: &[bool], onset: usize, run_length: usize) -> Result<Option<usize>> {
    check_onset(alarms, onset)?;
    if run_length == 0 {
        return Err(Error::InvalidConfig("run_length must be at least 1".into()));
    }
    let mut run = 0;
    for (i, &a) in alarms.iter().enumerate().skip(onset) {
        run = if a { run + 1 } else { 0 };
        if run == run_length {
            return Ok(Some(i + 1 - run_length - onset));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alarms_at(len: usize, hits: impl Fn(usize) -> bool) -> Vec<bool> {
        (0..len).map(hits).collect()
    }

    #[test]
    fn rates() {
        let none = vec![false; 960];
        let all = vec![true; 960];
        assert_eq!(fdr(&all, 160).unwrap(), 100.0);
        assert_eq!(fdr(&none, 160).unwrap(), 0.0);
        assert_eq!(far(&none, 160).unwrap(), 0.0);
        assert_eq!(far(&all, 160).unwrap(), 100.0);
        let a = alarms_at(960, |i| i >= 160 && (i - 160) % 8 != 0);
        assert_eq!(fdr(&a, 160).unwrap(), 87.5);
        let b = alarms_at(960, |i| i < 4);
        assert_eq!(far(&b, 160).unwrap(), 2.5);
        // detected + missed is exactly the post-onset count
        let missed = a[160..].iter().filter(|&&x| !x).count() as f64 / 8.0;
        assert_eq!(fdr(&a, 160).unwrap() + missed, 100.0);
        assert!(fdr(&a, 960).is_err());
        assert!(far(&a, 0).is_err());
    }

    #[test]
    fn delays() {
        let from_onset = alarms_at(960, |i| i >= 160);
        assert_eq!(detection_delay(&from_onset, 160, 3).unwrap(), Some(0));
        let late = alarms_at(960, |i| i >= 223);
        assert_eq!(detection_delay(&late, 160, 3).unwrap(), Some(63));
        let blip = alarms_at(960, |i| i == 170 || (200..205).contains(&i));
        assert_eq!(detection_delay(&blip, 160, 3).unwrap(), Some(40));
        assert_eq!(detection_delay(&blip, 160, 1).unwrap(), Some(10));
        assert_eq!(detection_delay(&vec![false; 960], 160, 3).unwrap(), None);
        // pre-onset alarms never count
        let early = alarms_at(960, |i| i < 170);
        assert_eq!(detection_delay(&early, 160, 3).unwrap(), Some(0));
        assert!(detection_delay(&early, 160, 0).is_err());
    }
}
