use core::fmt::{self, Write};

use super::{NTerm, PTerm};

pub(super) fn write_nterm(f: &mut dyn Write, e: &NTerm) -> fmt::Result {
    match e {
        NTerm::Nil => f.write_char('0'),
        NTerm::Prefix(a, p) => {
            write!(f, "{}.", a)?;
            write_patom(f, p)
        }
        NTerm::Choice(l, r) => {
            write_nterm(f, l)?;
            f.write_str(" + ")?;
            if matches!(**r, NTerm::Choice(_, _)) {
                f.write_char('(')?;
                write_nterm(f, r)?;
                f.write_char(')')
            } else {
                write_nterm(f, r)
            }
        }
    }
}

fn write_patom(f: &mut dyn Write, p: &PTerm) -> fmt::Result {
    match p {
        PTerm::Dirac(_) => write_pterm(f, p),
        PTerm::Choice(..) => {
            f.write_char('(')?;
            write_pterm(f, p)?;
            f.write_char(')')
        }
    }
}

pub(super) fn write_pterm(f: &mut dyn Write, p: &PTerm) -> fmt::Result {
    match p {
        PTerm::Dirac(e) => {
            f.write_str("D(")?;
            write_nterm(f, e)?;
            f.write_char(')')
        }
        PTerm::Choice(l, r, q) => {
            write_pterm(f, l)?;
            write!(f, " +[{}] ", r)?;
            write_patom(f, q)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse_nterm, parse_pterm};
    use alloc::string::ToString;

    #[test]
    fn canonical_forms() {
        for s in [
            "0",
            "a.D(0)",
            "a.D(0) + b.D(0) + c.D(0)",
            "a.D(0) + (b.D(0) + c.D(0))",
            "tau.(D(a.D(0)) +[1/2] D(b.D(0)))",
            "a.(D(0) +[1/4] (D(0) +[1/3] D(b.D(0))))",
        ] {
            assert_eq!(parse_nterm(s).unwrap().to_string(), s);
        }
        let p = parse_pterm("(D(0) +[1/2] D(0)) +[1/3] D(0)").unwrap();
        assert_eq!(p.to_string(), "D(0) +[1/2] D(0) +[1/3] D(0)");
    }
}
