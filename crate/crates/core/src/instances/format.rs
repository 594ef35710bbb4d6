//! Standard FJSP text format plus the emission sidecar and dataset manifest.
//!
//! ```text
//! n m [avg_flex]
//! k  a (machine time)*a  a (machine time)*a ...     <- one line per job
//! ```
//!
//! Machine ids are 1-based in files and 0-based in memory. Emission rates
//! live in a `<name>.em` sidecar holding one line of `m` positive decimals.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Instance, MachineProfile, OperationSpec, Provenance};
use crate::error::{Error, Result};

struct Tokens<'a> {
    items: std::iter::Peekable<std::slice::Iter<'a, &'a str>>,
    line: usize,
}

impl<'a> Tokens<'a> {
    fn next_num<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let tok = self
            .items
            .next()
            .ok_or_else(|| Error::parse(self.line, format!("truncated: expected {what}")))?;
        tok.parse()
            .map_err(|_| Error::parse(self.line, format!("invalid {what} `{tok}`")))
    }
}

/// Parses the standard FJSP format. Emission rates default to 1.0.
pub fn parse_fjsp(text: &str) -> Result<Instance> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty document: missing header"))?;
    let htoks: Vec<&str> = header.split_whitespace().collect();
    if htoks.len() < 2 || htoks.len() > 3 {
        return Err(Error::parse(
            hline,
            format!("header must be `n m [avg_flex]`, got `{header}`"),
        ));
    }
    let n: usize = htoks[0]
        .parse()
        .map_err(|_| Error::parse(hline, format!("invalid job count `{}`", htoks[0])))?;
    let m: usize = htoks[1]
        .parse()
        .map_err(|_| Error::parse(hline, format!("invalid machine count `{}`", htoks[1])))?;
    if n == 0 || m == 0 {
        return Err(Error::parse(hline, "job and machine counts must be positive"));
    }

    let mut jobs = Vec::with_capacity(n);
    for j in 0..n {
        let (line, body) = lines.next().ok_or_else(|| {
            Error::parse(
                text.lines().count().max(1),
                format!("header declares {n} jobs but job {} is missing", j + 1),
            )
        })?;
        let toks: Vec<&str> = body.split_whitespace().collect();
        let mut t = Tokens {
            items: toks.iter().peekable(),
            line,
        };
        let k: usize = t.next_num("operation count")?;
        if k == 0 {
            return Err(Error::parse(line, format!("job {} has no operations", j + 1)));
        }
        let mut ops = Vec::with_capacity(k);
        for idx in 0..k {
            let a: usize = t.next_num("alternative count")?;
            if a == 0 {
                return Err(Error::parse(
                    line,
                    format!("operation {} of job {} has no machines", idx + 1, j + 1),
                ));
            }
            let mut alts = Vec::with_capacity(a);
            for _ in 0..a {
                let mach: usize = t.next_num("machine id")?;
                if mach == 0 || mach > m {
                    return Err(Error::parse(
                        line,
                        format!("machine id {mach} out of range 1..={m}"),
                    ));
                }
                let p: f64 = t.next_num("processing time")?;
                if !(p > 0.0 && p.is_finite()) {
                    return Err(Error::parse(line, format!("non-positive processing time {p}")));
                }
                if alts.iter().any(|&(x, _)| x == mach - 1) {
                    return Err(Error::parse(line, format!("machine {mach} listed twice")));
                }
                alts.push((mach - 1, p));
            }
            ops.push(OperationSpec::new(j, idx, alts));
        }
        if let Some(extra) = t.items.next() {
            return Err(Error::parse(line, format!("unexpected trailing token `{extra}`")));
        }
        jobs.push(ops);
    }
    if let Some((line, _)) = lines.next() {
        return Err(Error::parse(line, format!("content after the {n} declared jobs")));
    }

    let inst = Instance {
        name: "unnamed".into(),
        jobs,
        machines: (0..m)
            .map(|id| MachineProfile {
                id,
                emission_rate: 1.0,
            })
            .collect(),
        provenance: Provenance::Manual,
    };
    inst.validate()?;
    Ok(inst)
}

/// Renders `inst` in the standard format, alternatives in ascending machine
/// order. Emission rates are not part of this document.
pub fn serialize_fjsp(inst: &Instance) -> String {
    let mut out = format!("{} {}\n", inst.n_jobs(), inst.n_machines());
    for ops in &inst.jobs {
        write!(out, "{}", ops.len()).unwrap();
        for op in ops {
            write!(out, " {}", op.alternatives.len()).unwrap();
            for &(m, p) in &op.alternatives {
                write!(out, " {} {:?}", m + 1, p).unwrap();
            }
        }
        out.push('\n');
    }
    out
}

pub fn serialize_emission_sidecar(inst: &Instance) -> String {
    let rates: Vec<String> = inst
        .machines
        .iter()
        .map(|m| format!("{:?}", m.emission_rate))
        .collect();
    format!("{}\n", rates.join(" "))
}

pub fn parse_emission_sidecar(text: &str, n_machines: usize) -> Result<Vec<f64>> {
    let rates = text
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::parse(1, format!("invalid emission rate `{t}`")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if rates.len() != n_machines {
        return Err(Error::parse(
            1,
            format!("expected {n_machines} emission rates, got {}", rates.len()),
        ));
    }
    if let Some(r) = rates.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(Error::parse(1, format!("non-positive emission rate {r}")));
    }
    Ok(rates)
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("em")
}

/// Writes `<path>` and its `.em` sidecar.
pub fn write_instance(inst: &Instance, path: &Path) -> Result<()> {
    fs::write(path, serialize_fjsp(inst)).map_err(|e| Error::io(path, e))?;
    let em = sidecar_path(path);
    fs::write(&em, serialize_emission_sidecar(inst)).map_err(|e| Error::io(&em, e))
}

/// Reads an instance file; rates come from the `.em` sidecar when present,
/// otherwise they stay at 1.0 for the caller to attach.
pub fn read_instance(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut inst = parse_fjsp(&text)?;
    let em = sidecar_path(path);
    if em.exists() {
        let text = fs::read_to_string(&em).map_err(|e| Error::io(&em, e))?;
        let rates = parse_emission_sidecar(&text, inst.n_machines())?;
        inst = inst.with_emission_rates(&rates)?;
    }
    inst.name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "unnamed".into());
    inst.provenance = Provenance::Parsed {
        path: path.display().to_string(),
    };
    Ok(inst)
}

/// Manifest: one instance path per line, relative to the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| base.join(l))
        .collect())
}

pub fn write_manifest(path: &Path, entries: &[PathBuf]) -> Result<()> {
    let mut out = String::new();
    for e in entries {
        writeln!(out, "{}", e.display()).unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate_instance, GenConfig};
    use proptest::prelude::*;

    #[test]
    fn minimal_file() {
        let inst = parse_fjsp("1 1\n1 1 1 5\n").unwrap();
        assert_eq!(inst.n_jobs(), 1);
        assert_eq!(inst.jobs[0][0].alternatives, vec![(0, 5.0)]);
        assert_eq!(inst.emission_rates(), vec![1.0]);
        assert_eq!(serialize_fjsp(&inst), "1 1\n1 1 1 5.0\n");
    }

    #[test]
    fn optional_flex_token_ignored() {
        let inst = parse_fjsp("2 2 1.5\n1 2 1 3 2 4\n2 1 2 1 1 1 7\n").unwrap();
        assert_eq!(inst.jobs[0][0].alternatives, vec![(0, 3.0), (1, 4.0)]);
        assert_eq!(inst.jobs[1][1].alternatives, vec![(0, 7.0)]);
    }

    #[test]
    fn missing_job_is_reported() {
        let err = parse_fjsp("3 2\n1 1 1 5\n1 1 2 3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("job 3 is missing"), "{msg}");
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse_fjsp("1 2\n\n1 1 3 5\n").unwrap_err() {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("out of range"));
            }
            e => panic!("unexpected {e}"),
        }
        assert!(matches!(parse_fjsp("x 2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            parse_fjsp("1 2\n2 1 1 5\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_fjsp("").is_err());
    }

    #[test]
    fn alternatives_written_in_machine_order() {
        let inst = parse_fjsp("1 3\n1 3 3 1 1 2 2 3\n").unwrap();
        assert_eq!(serialize_fjsp(&inst), "1 3\n1 3 1 2.0 2 3.0 3 1.0\n");
    }

    #[test]
    fn sidecar_round_trip() {
        let inst = generate_instance(4, &GenConfig::default()).unwrap();
        let text = serialize_emission_sidecar(&inst);
        assert_eq!(parse_emission_sidecar(&text, 5).unwrap(), inst.emission_rates());
        assert!(parse_emission_sidecar("1 2", 3).is_err());
        assert!(parse_emission_sidecar("1 -2 3", 3).is_err());
    }

    #[test]
    fn files_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let inst = generate_instance(11, &GenConfig::sized(4, 3)).unwrap();
        let path = dir.path().join("a.fjs");
        write_instance(&inst, &path).unwrap();
        let back = read_instance(&path).unwrap();
        assert!(back.same_structure(&inst));
        assert_eq!(back.emission_rates(), inst.emission_rates());
        assert_eq!(back.name, "a");

        let manifest = dir.path().join("train.txt");
        write_manifest(&manifest, &[PathBuf::from("a.fjs")]).unwrap();
        assert_eq!(read_manifest(&manifest).unwrap(), vec![path]);
    }

    proptest! {
        #[test]
        fn parse_inverts_serialize(seed in 0u64..10_000, flex in 0.2f64..1.0) {
            let cfg = GenConfig { flexibility: flex, ..GenConfig::default() };
            let inst = generate_instance(seed, &cfg).unwrap();
            let back = parse_fjsp(&serialize_fjsp(&inst)).unwrap();
            prop_assert!(back.same_structure(&inst));
        }
    }
}
