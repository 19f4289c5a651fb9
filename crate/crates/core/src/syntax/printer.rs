use std::fmt;

use crate::terms::Term;
use crate::theory::Op;

fn binding_power(op: Op) -> u8 {
    match op {
        Op::Implies => 1,
        Op::Or => 2,
        Op::And => 3,
        Op::Not => 4,
        Op::Ge | Op::Gt | Op::Eq | Op::Ne => 5,
        Op::Add | Op::Sub => 6,
        Op::Mul | Op::Div | Op::Mod => 7,
        Op::Exp => 9,
    }
}

fn write_term(t: &Term, min_bp: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Term::Var(v) => write!(f, "{v}"),
        Term::Int(n) => write!(f, "{n}"),
        Term::Bool(b) => write!(f, "{b}"),
        Term::App(sym, args) => {
            f.write_str(sym.name())?;
            if args.is_empty() {
                return Ok(());
            }
            f.write_str("(")?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write_term(a, 0, f)?;
            }
            f.write_str(")")
        }
        Term::Op(Op::Exp, args) => {
            f.write_str("exp(")?;
            write_term(&args[0], 0, f)?;
            f.write_str(", ")?;
            write_term(&args[1], 0, f)?;
            f.write_str(")")
        }
        Term::Op(Op::Not, args) => {
            f.write_str("!")?;
            if matches!(args[0], Term::Op(op, _) if op != Op::Exp) {
                f.write_str("(")?;
                write_term(&args[0], 0, f)?;
                f.write_str(")")
            } else {
                write_term(&args[0], 10, f)
            }
        }
        Term::Op(op, args) => {
            let bp = binding_power(*op);
            let (lbp, rbp) = match op {
                Op::Implies => (bp + 1, bp),
                Op::Ge | Op::Gt | Op::Eq | Op::Ne => (bp + 1, bp + 1),
                _ => (bp, bp + 1),
            };
            let paren = bp < min_bp;
            if paren {
                f.write_str("(")?;
            }
            write_term(&args[0], lbp, f)?;
            write!(f, " {} ", op.symbol())?;
            write_term(&args[1], rbp, f)?;
            if paren {
                f.write_str(")")?;
            }
            Ok(())
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_term(self, 0, f)
    }
}

#[cfg(test)]
mod tests {
    use crate::syntax::parse_constraint;
    use crate::theory::build::*;

    #[test]
    fn minimal_parentheses() {
        let e = mul(add(var("i"), int(1)), add(var("i"), int(2)));
        assert_eq!(e.to_string(), "(i + 1) * (i + 2)");
        let e = sub(var("a"), sub(var("b"), var("c")));
        assert_eq!(e.to_string(), "a - (b - c)");
        let e = sub(sub(var("a"), var("b")), var("c"));
        assert_eq!(e.to_string(), "a - b - c");
        assert_eq!(not(gt(var("x"), var("i"))).to_string(), "!(x > i)");
        assert_eq!(int(-3).to_string(), "-3");
    }

    #[test]
    fn print_parse_roundtrip_on_samples() {
        for src in [
            "2 * z = i * (i + 1) && x >= i && !(x > i)",
            "x >= 0 && 0 = 0",
            "a > 0 ==> b > 0 || c = 1",
            "(a > 0 ==> b > 0) ==> c > 0",
            "x - -1 > exp(2, y) mod 3",
            "!true || !(x != y)",
        ] {
            let t = parse_constraint(src).unwrap();
            assert_eq!(t.to_string(), src);
            assert_eq!(parse_constraint(&t.to_string()).unwrap(), t);
        }
    }
}
