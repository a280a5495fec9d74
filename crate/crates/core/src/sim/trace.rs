//! Per-frame trace rows and their CSV form.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::control::{ControlCommand, RcOutput};

pub const TRACE_HEADER: [&str; 19] = [
    "t",
    "target_x",
    "target_y",
    "target_z",
    "quad_x",
    "quad_y",
    "quad_z",
    "quad_yaw",
    "px",
    "py",
    "rms_radius",
    "detected",
    "yaw_cmd",
    "throttle_cmd",
    "forward_cmd",
    "rc_roll",
    "rc_pitch",
    "rc_throttle",
    "rc_yaw",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub target: [f64; 3],
    pub quad: [f64; 3],
    pub quad_yaw: f64,
    /// Observed centroid; zero when nothing was detected.
    pub px: f64,
    pub py: f64,
    pub rms_radius: f64,
    pub detected: bool,
    pub cmd: ControlCommand,
    pub rc: RcOutput,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Shortest rendering of `v` to 9 significant digits, in the style of C's `%.9g`.
pub fn fmt_sig9(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let m = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_fraction(&format!("{v:.decimals$}")).to_string()
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

impl TraceRow {
    fn fields(&self) -> Vec<String> {
        let reals = [
            self.t,
            self.target[0],
            self.target[1],
            self.target[2],
            self.quad[0],
            self.quad[1],
            self.quad[2],
            self.quad_yaw,
            self.px,
            self.py,
            self.rms_radius,
        ];
        let mut out: Vec<String> = reals.iter().map(|&v| fmt_sig9(v)).collect();
        out.push(u8::from(self.detected).to_string());
        out.extend([self.cmd.yaw, self.cmd.throttle, self.cmd.forward].map(fmt_sig9));
        out.extend(self.rc.channels().map(|c| c.to_string()));
        out
    }
}

pub fn write_trace<W: Write>(mut out: W, rows: &[TraceRow]) -> io::Result<()> {
    writeln!(out, "{}", TRACE_HEADER.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.fields().join(","))?;
    }
    out.flush()
}

pub fn trace_to_string(rows: &[TraceRow]) -> String {
    let mut buf = Vec::new();
    write_trace(&mut buf, rows).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<TraceRow>, TraceError> {
    let mut rows = Vec::new();
    let mut lines = input.lines().enumerate();
    match lines.next() {
        Some((_, header)) => {
            let header = header?;
            let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
            if cols != TRACE_HEADER {
                return Err(TraceError::Parse {
                    line: 1,
                    msg: format!("unexpected header {header:?}"),
                });
            }
        }
        None => {
            return Err(TraceError::Parse {
                line: 1,
                msg: "missing header".into(),
            })
        }
    }
    for (i, line) in lines {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| TraceError::Parse { line: line_no, msg };
        let f: Vec<&str> = line.trim().split(',').map(str::trim).collect();
        if f.len() != TRACE_HEADER.len() {
            return Err(err(format!(
                "expected {} columns, found {}",
                TRACE_HEADER.len(),
                f.len()
            )));
        }
        let real = |i: usize| {
            f[i].parse::<f64>()
                .map_err(|_| err(format!("{}: bad number {:?}", TRACE_HEADER[i], f[i])))
        };
        let us = |i: usize| {
            f[i].parse::<u16>()
                .map_err(|_| err(format!("{}: bad pulse width {:?}", TRACE_HEADER[i], f[i])))
        };
        let detected = match f[11] {
            "0" => false,
            "1" => true,
            other => return Err(err(format!("detected: expected 0 or 1, found {other:?}"))),
        };
        rows.push(TraceRow {
            t: real(0)?,
            target: [real(1)?, real(2)?, real(3)?],
            quad: [real(4)?, real(5)?, real(6)?],
            quad_yaw: real(7)?,
            px: real(8)?,
            py: real(9)?,
            rms_radius: real(10)?,
            detected,
            cmd: ControlCommand {
                yaw: real(12)?,
                throttle: real(13)?,
                forward: real(14)?,
            },
            rc: RcOutput {
                roll_us: us(15)?,
                pitch_us: us(16)?,
                throttle_us: us(17)?,
                yaw_us: us(18)?,
            },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_matches_printf_g() {
        let cases = [
            (0.0, "0"),
            (-0.0, "0"),
            (1.0, "1"),
            (0.2, "0.2"),
            (0.1 + 0.2, "0.3"),
            (-1.5, "-1.5"),
            (123456789.0, "123456789"),
            (1234567891.0, "1.23456789e+09"),
            (0.0001, "0.0001"),
            (0.00001, "1e-05"),
            (std::f64::consts::PI, "3.14159265"),
            (999999999.5, "1e+09"),
            (1e100, "1e+100"),
        ];
        for (v, s) in cases {
            assert_eq!(fmt_sig9(v), s, "{v}");
        }
    }

    #[test]
    fn csv_round_trip() {
        let row = TraceRow {
            t: 0.2,
            target: [5.0, 0.1, 0.5],
            quad: [8.0, -0.25, 0.5],
            quad_yaw: std::f64::consts::PI,
            px: 161.5,
            py: 119.25,
            rms_radius: 9.5,
            detected: true,
            cmd: ControlCommand {
                yaw: 0.0123,
                throttle: -0.5,
                forward: 1.0,
            },
            rc: RcOutput {
                roll_us: 1500,
                pitch_us: 1600,
                throttle_us: 1440,
                yaw_us: 1501,
            },
        };
        let text = trace_to_string(&[row, row]);
        assert!(text.starts_with("t,target_x,"));
        let back = read_trace(text.as_bytes()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].rc, row.rc);
        assert!((back[0].quad_yaw - row.quad_yaw).abs() < 1e-8);
        // re-serialising the parsed trace is byte-identical
        assert_eq!(trace_to_string(&back), text);
    }

    #[test]
    fn bad_rows_name_the_line() {
        let text = format!("{}\n1,2\n", TRACE_HEADER.join(","));
        match read_trace(text.as_bytes()) {
            Err(TraceError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
