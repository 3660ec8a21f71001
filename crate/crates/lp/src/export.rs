use std::io::{self, Write};

use crate::program::{LinearProgram, Sense};

fn sanitize(name: &str, fallback: &str) -> String {
    let cleaned: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "_.[]".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    if cleaned.is_empty() || cleaned.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        format!("{fallback}_{cleaned}")
    } else {
        cleaned
    }
}

fn write_terms<W: Write>(
    out: &mut W,
    terms: impl Iterator<Item = (String, f64)>,
) -> io::Result<()> {
    let mut any = false;
    for (i, (name, c)) in terms.enumerate() {
        if i % 8 == 7 {
            writeln!(out)?;
            write!(out, "   ")?;
        }
        if c < 0.0 {
            write!(out, " - {} {}", -c, name)?;
        } else {
            write!(out, " + {} {}", c, name)?;
        }
        any = true;
    }
    if !any {
        write!(out, " 0")?;
    }
    Ok(())
}

/// Writes the program in CPLEX LP text format (objective, constraint and
/// bounds sections) for cross-checking with external tools.
pub fn write_lp_format<W: Write>(program: &LinearProgram, out: &mut W) -> io::Result<()> {
    let names: Vec<String> = program
        .variables()
        .iter()
        .enumerate()
        .map(|(j, v)| format!("{}_{j}", sanitize(&v.name, "x")))
        .collect();

    writeln!(out, "\\ objective offset {}", program.objective_offset())?;
    writeln!(out, "Minimize")?;
    write!(out, " obj:")?;
    write_terms(
        out,
        program
            .objective()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(j, &c)| (names[j].clone(), c)),
    )?;
    writeln!(out)?;

    writeln!(out, "Subject To")?;
    for (i, c) in program.constraints().iter().enumerate() {
        write!(out, " {}_{i}:", sanitize(&c.name, "r"))?;
        write_terms(out, c.terms.iter().map(|&(v, a)| (names[v.0].clone(), a)))?;
        let op = match c.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        writeln!(out, " {op} {}", c.rhs)?;
    }

    writeln!(out, "Bounds")?;
    for (j, v) in program.variables().iter().enumerate() {
        let name = &names[j];
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => writeln!(out, " {name} free")?,
            (true, true) if v.lower == v.upper => writeln!(out, " {name} = {}", v.lower)?,
            (true, true) => writeln!(out, " {} <= {name} <= {}", v.lower, v.upper)?,
            (true, false) => {
                if v.lower != 0.0 {
                    writeln!(out, " {name} >= {}", v.lower)?
                }
            }
            (false, true) => writeln!(out, " -inf <= {name} <= {}", v.upper)?,
        }
    }
    writeln!(out, "End")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_all_sections() {
        let mut p = LinearProgram::new();
        let x = p.add_variable(0.0, 4.0, "x").unwrap();
        let g = p
            .add_variable(f64::NEG_INFINITY, f64::INFINITY, "gamma")
            .unwrap();
        p.set_objective_coefficient(x, -1.0).unwrap();
        p.add_constraint(vec![(x, 1.0), (g, -2.5)], Sense::Ge, 1.0, "c 1")
            .unwrap();
        let mut buf = Vec::new();
        write_lp_format(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("Minimize\n obj: - 1 x_0"));
        assert!(text.contains("c_1_0: + 1 x_0 - 2.5 gamma_1 >= 1"));
        assert!(text.contains("0 <= x_0 <= 4"));
        assert!(text.contains("gamma_1 free"));
        assert!(text.ends_with("End\n"));
    }
}
