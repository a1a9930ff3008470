use super::{FilterError, IirFilter};

/// Samples of odd-reflection padding added at each end.
pub fn pad_length(filter: &IirFilter) -> usize {
    3 * (filter.order() + 1)
}

/// Zero-phase filtering. The signal is extended at both ends by an odd
/// reflection of `pad_length` samples and filtered forward-then-backward and
/// backward-then-forward; the two results are averaged and the padding is
/// trimmed. Each pass starts from the steady-state section states scaled to
/// its first sample. The effective magnitude response is |H|² with zero
/// phase, and `filtfilt(reverse(x)) == reverse(filtfilt(x))` holds exactly.
pub fn filtfilt(filter: &IirFilter, signal: &[f64]) -> Result<Vec<f64>, FilterError> {
    let pad = pad_length(filter);
    let n = signal.len();
    if n <= pad {
        return Err(FilterError::TooShort { len: n, min: pad + 1 });
    }

    let first = signal[0];
    let last = signal[n - 1];
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - signal[i]));
    ext.extend_from_slice(signal);
    ext.extend((1..=pad).map(|i| 2.0 * last - signal[n - 1 - i]));

    let zi = filter.step_states();
    let pass = |x: &[f64]| {
        let x0 = x[0];
        let mut states: Vec<[f64; 2]> = zi.iter().map(|s| [s[0] * x0, s[1] * x0]).collect();
        filter.run(x, &mut states)
    };

    let reversed = |mut v: Vec<f64>| {
        v.reverse();
        v
    };
    let forward_backward = reversed(pass(&reversed(pass(&ext))));
    let backward_forward = pass(&reversed(pass(&reversed(ext))));
    Ok(forward_backward[pad..pad + n]
        .iter()
        .zip(&backward_forward[pad..pad + n])
        .map(|(a, b)| 0.5 * (a + b))
        .collect())
}
