use std::fmt::Write as _;

use super::{Command, Line, WhileAst};

fn render(line: &Line) -> String {
    match &line.command {
        Command::Assign { var, expr } => format!("{var} := {expr};"),
        Command::Skip => "skip;".into(),
        Command::IfOpen { cond } => format!("if ({cond}) {{"),
        Command::ElseOpen => "} else {".into(),
        Command::Close => "}".into(),
        Command::WhileOpen { invariant, guard, rank } => {
            let mut s = String::from("while ");
            if let Some(inv) = invariant {
                write!(s, "@ {inv} ").expect("string write");
            }
            if let Some(r) = rank {
                write!(s, "@rank {r} ").expect("string write");
            }
            write!(s, "({guard}) {{").expect("string write");
            s
        }
        Command::Assert { cond } => format!("@ {cond};"),
        Command::Blank => String::new(),
    }
}

fn layout(ast: &WhileAst, numbered: bool) -> String {
    let mut out = String::new();
    let mut depth = 0usize;
    let width = ast.end_line().to_string().len();
    for line in ast.lines() {
        if matches!(line.command, Command::Close | Command::ElseOpen) {
            depth = depth.saturating_sub(1);
        }
        let text = render(line);
        if numbered {
            write!(out, "{:>width$}  ", line.number).expect("string write");
        }
        if !text.is_empty() {
            out.push_str(&"  ".repeat(depth));
            out.push_str(&text);
        }
        let trimmed_len = out.trim_end_matches(' ').len();
        out.truncate(trimmed_len);
        out.push('\n');
        if matches!(
            line.command,
            Command::IfOpen { .. } | Command::ElseOpen | Command::WhileOpen { .. }
        ) {
            depth += 1;
        }
    }
    out
}

/// Source text that parses back to the same program. The final blank
/// line is implicit and not printed.
pub fn print_program(ast: &WhileAst) -> String {
    let mut s = layout(ast, false);
    // Drop the newline contributed by the blank end line.
    s.pop();
    s
}

/// Listing with line numbers, including the final blank line.
pub fn print_numbered(ast: &WhileAst) -> String {
    layout(ast, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::whilelang::parse_program;

    #[test]
    fn roundtrip() {
        let src = "@ x >= 0;\ni := 0;\nwhile @ 2 * z = i * (i + 1) @rank x - i (x > i) {\n  if (i < 0 || !(z = 1)) {\n    skip;\n  } else {\n    z := z / 2;\n  }\n  i := i + 1;\n}\n@ true;\n";
        let ast = parse_program(src).unwrap();
        let printed = print_program(&ast);
        assert_eq!(parse_program(&printed).unwrap(), ast);
        assert_eq!(print_program(&parse_program(&printed).unwrap()), printed);
    }

    #[test]
    fn numbered_listing() {
        let ast = parse_program("i := 0;\nwhile (x > i) {\n i := i + 1;\n}\n").unwrap();
        assert_eq!(print_numbered(&ast), "1  i := 0;\n2  while (x > i) {\n3    i := i + 1;\n4  }\n5\n");
    }
}
