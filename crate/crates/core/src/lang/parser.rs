//! Recursive-descent parser for MIL.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

/// Parses source text without the static name check.
pub fn parse_unchecked(src: &str) -> Result<Program, ParseError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0 };
    let mut functions = Vec::new();
    while p.peek() != &Tok::Eof {
        functions.push(p.function()?);
    }
    Ok(Program { functions })
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let span = self.span();
        Err(ParseError::Syntax {
            line: span.line,
            col: span.col,
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Span, ParseError> {
        if *self.peek() == tok {
            Ok(self.advance().span)
        } else {
            self.error(format!("expected {what}, found {}", describe(self.peek())))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Span), ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let span = self.advance().span;
                Ok((name, span))
            }
            other => self.error(format!("expected {what}, found {}", describe(&other))),
        }
    }

    fn function(&mut self) -> Result<Function, ParseError> {
        let span = self.expect(Tok::Fn, "`fn`")?;
        let (name, _) = self.ident("function name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let (pname, pspan) = self.ident("parameter name")?;
                self.expect(Tok::Colon, "`:`")?;
                let (tname, _) = self.ident("parameter type")?;
                let Some(ty) = Type::from_keyword(&tname) else {
                    return self.error(format!("unknown type `{tname}`"));
                };
                params.push(Param {
                    name: pname,
                    ty,
                    span: pspan,
                });
                if *self.peek() == Tok::Comma {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        let body = self.block()?;
        let n = params.len();
        Ok(Function {
            name,
            params,
            body,
            span,
            param_sites: vec![None; n],
        })
    }

    fn block(&mut self) -> Result<Block, ParseError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return self.error("unexpected end of input, expected `}`");
            }
            stmts.push(self.statement()?);
        }
        self.advance();
        Ok(Block { stmts })
    }

    fn statement(&mut self) -> Result<Stmt, ParseError> {
        let span = self.span();
        let kind = match self.peek().clone() {
            Tok::Let => {
                self.advance();
                let (target, _) = self.ident("variable name")?;
                self.assignment_rest(target, true)?
            }
            Tok::Ident(name) if *self.peek_at(1) == Tok::Assign => {
                self.advance();
                self.assignment_rest(name, false)?
            }
            Tok::If => self.if_stmt()?,
            Tok::While => {
                self.advance();
                let prelude = if *self.peek() == Tok::LBrace {
                    self.block()?
                } else {
                    Block::default()
                };
                let cond = self.paren_expr()?;
                let body = self.block()?;
                StmtKind::While {
                    prelude,
                    cond,
                    body,
                }
            }
            Tok::Print => {
                self.advance();
                let e = self.paren_expr()?;
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Print(e)
            }
            Tok::Assert => {
                self.advance();
                let e = self.paren_expr()?;
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Assert(e)
            }
            Tok::Return => {
                self.advance();
                let e = if *self.peek() == Tok::Semi {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Return(e)
            }
            _ => {
                let e = self.expr()?;
                if !matches!(e.kind, ExprKind::Call(..)) {
                    return Err(ParseError::Syntax {
                        line: span.line,
                        col: span.col,
                        message: "only calls may be used as statements".into(),
                    });
                }
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Expr(e)
            }
        };
        Ok(Stmt { kind, span })
    }

    fn assignment_rest(&mut self, target: String, declare: bool) -> Result<StmtKind, ParseError> {
        self.expect(Tok::Assign, "`=`")?;
        let value = self.expr()?;
        let guard = match self.peek() {
            Tok::When | Tok::Unless => {
                let when = *self.peek() == Tok::When;
                self.advance();
                let (var, _) = self.ident("guard variable")?;
                Some(Guard { var, when })
            }
            _ => None,
        };
        self.expect(Tok::Semi, "`;`")?;
        Ok(StmtKind::Assign {
            target,
            value,
            declare,
            guard,
            site: None,
        })
    }

    fn if_stmt(&mut self) -> Result<StmtKind, ParseError> {
        self.expect(Tok::If, "`if`")?;
        let cond = self.paren_expr()?;
        let then_block = self.block()?;
        let else_block = if *self.peek() == Tok::Else {
            self.advance();
            if *self.peek() == Tok::If {
                // `else if` is sugar for an else block holding one if.
                let span = self.span();
                let kind = self.if_stmt()?;
                Some(Block {
                    stmts: vec![Stmt { kind, span }],
                })
            } else {
                Some(self.block()?)
            }
        } else {
            None
        };
        Ok(StmtKind::If {
            cond,
            then_block,
            else_block,
        })
    }

    fn paren_expr(&mut self) -> Result<Expr, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        let e = self.expr()?;
        self.expect(Tok::RParen, "`)`")?;
        Ok(e)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(1)
    }

    fn binop(tok: &Tok) -> Option<BinOp> {
        Some(match tok {
            Tok::OrOr => BinOp::Or,
            Tok::AndAnd => BinOp::And,
            Tok::EqEq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            Tok::Percent => BinOp::Rem,
            _ => return None,
        })
    }

    // Precedence climbing; every binary level is left-associative.
    fn binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = Self::binop(self.peek()) {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.advance();
            let rhs = self.binary(prec + 1)?;
            let span = lhs.span;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let span = self.span();
        match self.peek() {
            Tok::Bang => {
                self.advance();
                let e = self.unary()?;
                Ok(Expr::new(ExprKind::Unary(UnOp::Not, Box::new(e)), span))
            }
            Tok::Minus => {
                self.advance();
                // A minus directly before a numeric literal folds into it.
                match self.peek().clone() {
                    Tok::Int(v) => {
                        self.advance();
                        Ok(Expr::new(ExprKind::Int(v.wrapping_neg()), span))
                    }
                    Tok::Float(v) => {
                        self.advance();
                        Ok(Expr::new(ExprKind::Float(-v), span))
                    }
                    _ => {
                        let e = self.unary()?;
                        Ok(Expr::new(ExprKind::Unary(UnOp::Neg, Box::new(e)), span))
                    }
                }
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let span = self.span();
        let kind = match self.peek().clone() {
            Tok::Int(v) => {
                self.advance();
                ExprKind::Int(v)
            }
            Tok::Float(v) => {
                self.advance();
                ExprKind::Float(v)
            }
            Tok::Str(s) => {
                self.advance();
                ExprKind::Str(s)
            }
            Tok::True => {
                self.advance();
                ExprKind::Bool(true)
            }
            Tok::False => {
                self.advance();
                ExprKind::Bool(false)
            }
            Tok::Ident(name) => {
                self.advance();
                if *self.peek() == Tok::LParen {
                    self.advance();
                    let mut args = Vec::new();
                    if *self.peek() != Tok::RParen {
                        loop {
                            args.push(self.expr()?);
                            if *self.peek() == Tok::Comma {
                                self.advance();
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    ExprKind::Call(name, args)
                } else {
                    ExprKind::Var(name)
                }
            }
            Tok::LParen => {
                self.advance();
                let mut e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                e.span = span;
                return Ok(e);
            }
            other => return self.error(format!("expected expression, found {}", describe(&other))),
        };
        Ok(Expr::new(kind, span))
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Ident(n) => format!("identifier `{n}`"),
        Tok::Int(v) => format!("integer {v}"),
        Tok::Float(v) => format!("float {v}"),
        Tok::Str(_) => "string literal".into(),
        Tok::Eof => "end of input".into(),
        other => format!("{other:?}"),
    }
}
