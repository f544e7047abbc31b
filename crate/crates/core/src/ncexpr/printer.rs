use super::Expr;

const SUM: u8 = 0;
const PRODUCT: u8 = 1;
const UNARY: u8 = 2;
const ATOM: u8 = 3;

/// Renders expressions in the parser's grammar. Output produced from a
/// parsed tree reparses to the identical tree.
#[derive(Debug, Clone, Default)]
pub struct Printer {
    names: Vec<String>,
}

impl Printer {
    /// Uses `names[i]` for variable `x{i+1}` where present.
    pub fn with_names(names: &[String]) -> Self {
        Printer {
            names: names.to_vec(),
        }
    }

    pub fn print(&self, e: &Expr) -> String {
        let mut out = String::new();
        self.write(e, SUM, &mut out);
        out
    }

    fn write(&self, e: &Expr, min_prec: u8, out: &mut String) {
        let prec = precedence(e);
        let paren = prec < min_prec;
        if paren {
            out.push('(');
        }
        match e {
            Expr::Scalar(z) => write_scalar(z.re, z.im, out),
            Expr::Var(i) => match self.names.get(i - 1) {
                Some(name) => out.push_str(name),
                None => out.push_str(&format!("x{i}")),
            },
            Expr::Neg(a) => {
                out.push('-');
                self.write(a, UNARY, out);
            }
            Expr::Add(a, b) => {
                self.write(a, SUM, out);
                if let Expr::Neg(inner) = b.as_ref() {
                    out.push_str(" - ");
                    self.write(inner, PRODUCT, out);
                } else {
                    out.push_str(" + ");
                    self.write(b, PRODUCT, out);
                }
            }
            Expr::Mul(a, b) => {
                self.write(a, PRODUCT, out);
                out.push('*');
                self.write(b, UNARY, out);
            }
            Expr::Inv(a) => {
                out.push_str("inv(");
                self.write(a, SUM, out);
                out.push(')');
            }
            Expr::Adjoint(a) => {
                out.push_str("adj(");
                self.write(a, SUM, out);
                out.push(')');
            }
        }
        if paren {
            out.push(')');
        }
    }
}

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) => SUM,
        Expr::Mul(..) => PRODUCT,
        Expr::Neg(_) => UNARY,
        Expr::Scalar(z) if !is_literal(z.re, z.im) => SUM,
        _ => ATOM,
    }
}

/// Scalars the parser can produce as a single literal.
fn is_literal(re: f64, im: f64) -> bool {
    (im == 0.0 && re >= 0.0) || (re == 0.0 && im >= 0.0)
}

fn write_scalar(re: f64, im: f64, out: &mut String) {
    // normalize -0.0
    let (re, im) = (re + 0.0, im + 0.0);
    if im == 0.0 && re >= 0.0 {
        out.push_str(&format!("{re}"));
    } else if re == 0.0 && im >= 0.0 {
        out.push_str(&format!("{im}i"));
    } else if im == 0.0 {
        out.push_str(&format!("-{}", -re));
    } else if re == 0.0 {
        out.push_str(&format!("-{}i", -im));
    } else {
        let sign = if re < 0.0 { "-" } else { "" };
        let op = if im < 0.0 { "-" } else { "+" };
        out.push_str(&format!("{sign}{} {op} {}i", re.abs(), im.abs()));
    }
}
