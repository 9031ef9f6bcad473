use std::collections::{BTreeMap, BTreeSet};

use super::lexer::{lex, lex_line, Line, Tok, Token};
use super::{
    AttributeSpec, ConversionPlan, EntityBlock, MatchSpec, NodeRef, NodeTemplate,
    RelationshipTemplate, Span, SyntaxError, ValueExpr, Warning, WrapperName, KEYWORDS,
};
use crate::value::Value;

fn err<T>(message: impl Into<String>, span: Span) -> Result<T, SyntaxError> {
    Err(SyntaxError::new(message, span))
}

struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
    eol: Span,
}

impl<'a> Cursor<'a> {
    fn new(line: &'a Line) -> Self {
        Cursor {
            toks: &line.tokens,
            pos: 0,
            eol: Span::new(line.number, line.end_col),
        }
    }

    fn peek(&self) -> Option<&'a Tok> {
        self.peek_at(0)
    }

    fn peek_at(&self, n: usize) -> Option<&'a Tok> {
        self.toks.get(self.pos + n).map(|t| &t.tok)
    }

    /// Span of the next token, or end of line.
    fn span(&self) -> Span {
        self.toks.get(self.pos).map_or(self.eol, |t| t.span)
    }

    fn next(&mut self) -> Option<&'a Token> {
        let t = self.toks.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn is_last(&self) -> bool {
        self.pos + 1 == self.toks.len()
    }

    fn found(&self) -> String {
        self.peek().map_or("end of line".into(), Tok::describe)
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Span, SyntaxError> {
        let span = self.span();
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(span)
        } else {
            err(format!("expected {what}, found {}", self.found()), span)
        }
    }

    fn expect_end(&self) -> Result<(), SyntaxError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => err(format!("unexpected {} at end of line", t.describe()), self.span()),
        }
    }
}

fn keyword_misuse(name: &str, span: Span) -> SyntaxError {
    let message = match name {
        "MATCH" => "MATCH is only valid as a relationship endpoint".to_string(),
        "ENTITY" => "ENTITY is only allowed at the top level".to_string(),
        other => format!("keyword `{other}` cannot appear here"),
    };
    SyntaxError::new(message, span)
}

fn expr(c: &mut Cursor<'_>) -> Result<ValueExpr, SyntaxError> {
    let span = c.span();
    let Some(tok) = c.next() else {
        return err("expected an expression, found end of line", span);
    };
    match &tok.tok {
        Tok::Str(s) => Ok(ValueExpr::Literal(Value::Text(s.clone()))),
        Tok::Int(i) => Ok(ValueExpr::Literal(Value::Int(*i))),
        Tok::Float(f) => Ok(ValueExpr::Literal(Value::Float(*f))),
        Tok::Minus => match c.next().map(|t| &t.tok) {
            Some(Tok::Int(i)) => Ok(ValueExpr::Literal(Value::Int(-i))),
            Some(Tok::Float(f)) => Ok(ValueExpr::Literal(Value::Float(-f))),
            _ => err("expected a number after `-`", span),
        },
        Tok::Ident(name) => {
            let follow = c.peek();
            if matches!(name.as_str(), "true" | "false") && !matches!(follow, Some(Tok::Dot | Tok::LParen)) {
                return Ok(ValueExpr::Literal(Value::Bool(name == "true")));
            }
            if KEYWORDS.contains(&name.as_str()) {
                return Err(keyword_misuse(name, span));
            }
            match follow {
                Some(Tok::Dot) => {
                    let dot = c.span();
                    c.next();
                    match c.next().map(|t| &t.tok) {
                        Some(Tok::Ident(attr)) => Ok(ValueExpr::AttrRef {
                            prefix: name.clone(),
                            attr: attr.clone(),
                            span,
                        }),
                        _ => err(format!("dangling `.`: expected an attribute name after `{name}.`"), dot),
                    }
                }
                Some(Tok::LParen) => {
                    c.next();
                    let arg = expr(c)?;
                    match c.peek() {
                        Some(Tok::RParen) => {
                            c.next();
                            Ok(ValueExpr::WrapperCall {
                                wrapper: name.clone(),
                                arg: Box::new(arg),
                                span,
                            })
                        }
                        Some(Tok::Comma) => err(format!("wrapper `{name}` takes exactly one argument"), c.span()),
                        _ => err(
                            format!("unclosed call to `{name}`: expected `)`, found {}", c.found()),
                            c.span(),
                        ),
                    }
                }
                _ => err(
                    format!("bare name `{name}`: attribute references need a prefix, as in `{name}.attr`"),
                    span,
                ),
            }
        }
        other => err(format!("expected an expression, found {}", other.describe()), span),
    }
}

/// Parses a single value expression, e.g. `CodeToCategory(Product.CategoryCode)`.
pub fn parse_value_expr(text: &str) -> Result<ValueExpr, SyntaxError> {
    let Some(line) = lex_line(text, 1)? else {
        return err("expected an expression, found end of input", Span::new(1, 1));
    };
    let mut c = Cursor::new(&line);
    let e = expr(&mut c)?;
    c.expect_end()?;
    Ok(e)
}

enum Element {
    Node {
        labels: Vec<ValueExpr>,
        span: Span,
    },
    Relationship {
        source: NodeRef,
        rel_type: ValueExpr,
        target: NodeRef,
        span: Span,
    },
}

struct HeaderParser<'w> {
    warnings: &'w mut Vec<Warning>,
}

impl HeaderParser<'_> {
    /// Consumes the `)` that closes `what`. An outermost call may be left open
    /// when only the final `:` remains; that is accepted with a warning.
    fn close(&mut self, c: &mut Cursor<'_>, depth: usize, what: &str) -> Result<(), SyntaxError> {
        match c.peek() {
            Some(Tok::RParen) => {
                c.next();
                Ok(())
            }
            Some(Tok::Colon) if depth == 0 && c.is_last() => {
                self.warnings.push(Warning {
                    message: format!("missing `)` closing {what}; assumed before the final `:`"),
                    span: c.span(),
                });
                Ok(())
            }
            _ => err(
                format!("unbalanced parentheses: expected `)` to close {what}, found {}", c.found()),
                c.span(),
            ),
        }
    }

    fn element(
        &mut self,
        c: &mut Cursor<'_>,
        depth: usize,
        wrappers: &mut Vec<WrapperName>,
    ) -> Result<Element, SyntaxError> {
        let span = c.span();
        let name = match c.next().map(|t| &t.tok) {
            Some(Tok::Ident(name)) => name,
            Some(other) => {
                return err(
                    format!("expected NODE or RELATIONSHIP, found {}", other.describe()),
                    span,
                )
            }
            None => return err("expected NODE or RELATIONSHIP, found end of line", span),
        };
        match name.as_str() {
            "NODE" => {
                c.expect(Tok::LParen, "`(` after NODE")?;
                if c.peek() == Some(&Tok::RParen) {
                    return err("NODE needs at least one label", c.span());
                }
                let mut labels = vec![expr(c)?];
                while c.peek() == Some(&Tok::Comma) {
                    c.next();
                    labels.push(expr(c)?);
                }
                self.close(c, depth, "NODE")?;
                Ok(Element::Node { labels, span })
            }
            "RELATIONSHIP" => {
                c.expect(Tok::LParen, "`(` after RELATIONSHIP")?;
                let source = self.node_ref(c)?;
                c.expect(Tok::Comma, "`,` after the relationship source")?;
                let rel_type = expr(c)?;
                c.expect(Tok::Comma, "`,` after the relationship type")?;
                let target = self.node_ref(c)?;
                if c.peek() == Some(&Tok::Comma) {
                    return err(
                        "RELATIONSHIP takes exactly three arguments: source, type, target",
                        c.span(),
                    );
                }
                self.close(c, depth, "RELATIONSHIP")?;
                Ok(Element::Relationship {
                    source,
                    rel_type,
                    target,
                    span,
                })
            }
            "ENTITY" | "MATCH" => Err(keyword_misuse(name, span)),
            _ => {
                let wraps_element = c.peek() == Some(&Tok::LParen)
                    && matches!(c.peek_at(1), Some(Tok::Ident(_)))
                    && c.peek_at(2) == Some(&Tok::LParen);
                if !wraps_element {
                    return err(
                        format!("unknown keyword `{name}`: expected NODE, RELATIONSHIP or a wrapper around one"),
                        span,
                    );
                }
                c.next();
                wrappers.push(WrapperName {
                    name: name.clone(),
                    span,
                });
                let inner = self.element(c, depth + 1, wrappers)?;
                self.close(c, depth, &format!("wrapper `{name}`"))?;
                Ok(inner)
            }
        }
    }

    fn node_ref(&mut self, c: &mut Cursor<'_>) -> Result<NodeRef, SyntaxError> {
        let span = c.span();
        match (c.peek(), c.peek_at(1)) {
            (Some(Tok::Ident(m)), Some(Tok::LParen)) if m == "MATCH" => {
                c.next();
                c.next();
                let mut labels = Vec::new();
                let mut conditions = Vec::new();
                loop {
                    let item = c.span();
                    if let (Some(Tok::Ident(key)), Some(Tok::Eq)) = (c.peek(), c.peek_at(1)) {
                        c.next();
                        c.next();
                        conditions.push((key.clone(), expr(c)?));
                    } else if c.peek() == Some(&Tok::RParen) && labels.is_empty() {
                        return err("MATCH needs at least one label", item);
                    } else {
                        if !conditions.is_empty() {
                            return err("MATCH labels must come before attribute conditions", item);
                        }
                        labels.push(expr(c)?);
                    }
                    if c.peek() == Some(&Tok::Comma) {
                        c.next();
                    } else {
                        break;
                    }
                }
                if labels.is_empty() {
                    return err("MATCH needs at least one label", span);
                }
                self.close(c, 1, "MATCH")?;
                Ok(NodeRef::Match(MatchSpec { labels, conditions }))
            }
            (Some(Tok::Ident(name)), next) if !matches!(next, Some(Tok::LParen | Tok::Dot)) => {
                if KEYWORDS.contains(&name.as_str()) {
                    return Err(keyword_misuse(name, span));
                }
                c.next();
                Ok(NodeRef::Identifier {
                    name: name.clone(),
                    span,
                })
            }
            _ => err(
                format!("expected a node identifier or MATCH(...), found {}", c.found()),
                span,
            ),
        }
    }
}

enum Declared {
    Node(usize),
    Relationship(usize),
}

struct BlockBuilder {
    block: EntityBlock,
    element_indent: Option<usize>,
    attribute_indent: Option<usize>,
    last: Option<Declared>,
    identifiers: BTreeMap<String, Span>,
}

impl BlockBuilder {
    fn new(name: String, span: Span) -> Self {
        BlockBuilder {
            block: EntityBlock {
                name,
                nodes: Vec::new(),
                relationships: Vec::new(),
                span,
            },
            element_indent: None,
            attribute_indent: None,
            last: None,
            identifiers: BTreeMap::new(),
        }
    }

    fn declaration(&mut self, line: &Line, warnings: &mut Vec<Warning>) -> Result<(), SyntaxError> {
        let mut c = Cursor::new(line);
        let mut wrappers = Vec::new();
        let element = HeaderParser { warnings }.element(&mut c, 0, &mut wrappers)?;

        let mut identifier = None;
        if let Some(Tok::Ident(name)) = c.peek() {
            let span = c.span();
            if matches!(element, Element::Relationship { .. }) {
                return err("only NODE declarations can carry an identifier", span);
            }
            if KEYWORDS.contains(&name.as_str()) {
                return err(format!("keyword `{name}` cannot be used as an identifier"), span);
            }
            if let Some(first) = self.identifiers.get(name) {
                return err(
                    format!("duplicate identifier `{name}` (first declared on line {})", first.line),
                    span,
                );
            }
            self.identifiers.insert(name.clone(), span);
            identifier = Some(name.clone());
            c.next();
        }
        match c.peek() {
            Some(Tok::Colon) => {
                c.next();
            }
            Some(Tok::RParen) => return err("unbalanced parentheses: unexpected `)`", c.span()),
            None => return err("missing `:` at end of declaration", c.span()),
            Some(other) => return err(format!("expected `:`, found {}", other.describe()), c.span()),
        }
        c.expect_end()?;

        self.attribute_indent = None;
        match element {
            Element::Node { labels, span } => {
                let template_index = self.block.nodes.len();
                self.block.nodes.push(NodeTemplate {
                    labels,
                    identifier,
                    attributes: Vec::new(),
                    subgraph_wrappers: wrappers,
                    template_index,
                    span,
                });
                self.last = Some(Declared::Node(template_index));
            }
            Element::Relationship {
                source,
                rel_type,
                target,
                span,
            } => {
                let template_index = self.block.relationships.len();
                self.block.relationships.push(RelationshipTemplate {
                    source,
                    rel_type,
                    target,
                    attributes: Vec::new(),
                    subgraph_wrappers: wrappers,
                    template_index,
                    span,
                });
                self.last = Some(Declared::Relationship(template_index));
            }
        }
        Ok(())
    }

    fn attribute(&mut self, line: &Line) -> Result<(), SyntaxError> {
        let mut c = Cursor::new(line);
        let span = c.span();
        let primary = match c.next().map(|t| &t.tok) {
            Some(Tok::Plus) => true,
            Some(Tok::Minus) => false,
            _ => return err("attribute line must start with `+` (primary) or `-`", span),
        };
        let key_span = c.span();
        let key = match c.next().map(|t| &t.tok) {
            Some(Tok::Ident(k)) => k.clone(),
            _ => return err("expected an attribute name", key_span),
        };
        c.expect(Tok::Eq, "`=` after the attribute name")?;
        let value = expr(&mut c)?;
        c.expect_end()?;

        let attributes = match self.last {
            Some(Declared::Node(i)) => &mut self.block.nodes[i].attributes,
            Some(Declared::Relationship(i)) => &mut self.block.relationships[i].attributes,
            None => return err("attribute line outside a NODE or RELATIONSHIP declaration", span),
        };
        if primary {
            if let Some(first) = attributes.iter().find(|a| a.primary) {
                return err(
                    format!(
                        "second primary attribute `{key}`; `{}` on line {} is already primary",
                        first.key, first.span.line
                    ),
                    span,
                );
            }
        }
        attributes.push(AttributeSpec {
            key,
            value,
            primary,
            span,
        });
        Ok(())
    }

    /// Reference checks that need the whole block.
    fn finish(self) -> Result<EntityBlock, SyntaxError> {
        let block = self.block;
        let mut prefixes: BTreeSet<&str> = self.identifiers.keys().map(String::as_str).collect();
        prefixes.insert(&block.name);

        let check_expr = |e: &ValueExpr| -> Result<(), SyntaxError> {
            for site in e.attr_refs() {
                if !prefixes.contains(site.prefix) {
                    return err(
                        format!(
                            "unknown prefix `{}` in `{}.{}`: expected `{}` or a node identifier of this block",
                            site.prefix, site.prefix, site.attr, block.name
                        ),
                        site.span,
                    );
                }
            }
            Ok(())
        };
        let check_ref = |r: &NodeRef| -> Result<(), SyntaxError> {
            match r {
                NodeRef::Identifier { name, span } => {
                    if block.node_by_identifier(name).is_none() {
                        return err(format!("unknown node identifier `{name}`"), *span);
                    }
                    Ok(())
                }
                NodeRef::Match(m) => {
                    m.labels.iter().try_for_each(check_expr)?;
                    m.conditions.iter().try_for_each(|(_, e)| check_expr(e))
                }
            }
        };

        for node in &block.nodes {
            node.labels.iter().try_for_each(check_expr)?;
            node.attributes.iter().try_for_each(|a| check_expr(&a.value))?;
        }
        for rel in &block.relationships {
            check_ref(&rel.source)?;
            check_expr(&rel.rel_type)?;
            check_ref(&rel.target)?;
            rel.attributes.iter().try_for_each(|a| check_expr(&a.value))?;
        }
        Ok(block)
    }
}

fn entity_header(line: &Line) -> Result<(String, Span), SyntaxError> {
    let mut c = Cursor::new(line);
    let span = c.span();
    match c.next().map(|t| &t.tok) {
        Some(Tok::Ident(k)) if k == "ENTITY" => {}
        Some(Tok::Ident(k)) if k == "NODE" || k == "RELATIONSHIP" => {
            return err(format!("{k} declarations must be indented inside an ENTITY block"), span)
        }
        Some(Tok::Ident(k)) => return err(format!("unknown keyword `{k}` at top level: expected ENTITY"), span),
        _ => return err("expected ENTITY", span),
    }
    c.expect(Tok::LParen, "`(` after ENTITY")?;
    let name_span = c.span();
    let name = match c.next().map(|t| &t.tok) {
        Some(Tok::Str(s)) if !s.is_empty() => s.clone(),
        Some(Tok::Str(_)) => return err("ENTITY name must not be empty", name_span),
        _ => return err("ENTITY expects a quoted resource type name", name_span),
    };
    match c.peek() {
        Some(Tok::RParen) => {
            c.next();
        }
        _ => {
            return err(
                format!("unbalanced parentheses: expected `)` to close ENTITY, found {}", c.found()),
                c.span(),
            )
        }
    }
    match c.peek() {
        Some(Tok::Colon) => {
            c.next();
        }
        None => return err("missing `:` at end of ENTITY declaration", c.span()),
        Some(other) => return err(format!("expected `:`, found {}", other.describe()), c.span()),
    }
    c.expect_end()?;
    Ok((name, span))
}

/// Parses schema text into an unlinked plan. Wrapper names are not checked
/// here; see [`link_plan`](super::link_plan).
pub fn parse_schema(text: &str) -> Result<ConversionPlan, SyntaxError> {
    let lines = lex(text)?;
    let unit = lines.iter().map(|l| l.indent).find(|&i| i > 0);

    let mut plan = ConversionPlan::default();
    let mut seen: BTreeMap<String, Span> = BTreeMap::new();
    let mut current: Option<BlockBuilder> = None;

    for line in &lines {
        if let Some(unit) = unit {
            if line.indent % unit != 0 {
                return err(
                    format!(
                        "indentation of {} spaces is not a multiple of the indent unit ({unit})",
                        line.indent
                    ),
                    Span::new(line.number, 1),
                );
            }
        }

        if line.indent == 0 {
            if let Some(b) = current.take() {
                plan.entities.push(b.finish()?);
            }
            let (name, span) = entity_header(line)?;
            if let Some(first) = seen.get(&name) {
                return err(
                    format!("duplicate ENTITY \"{name}\" (first declared on line {})", first.line),
                    span,
                );
            }
            seen.insert(name.clone(), span);
            current = Some(BlockBuilder::new(name, span));
            continue;
        }

        let Some(b) = current.as_mut() else {
            return err("indented line outside an ENTITY block", Span::new(line.number, 1));
        };
        let element_indent = *b.element_indent.get_or_insert(line.indent);
        let starts_attribute = matches!(line.tokens[0].tok, Tok::Plus | Tok::Minus);
        if line.indent < element_indent {
            return err(
                format!(
                    "inconsistent indentation: declarations in this block are indented {element_indent} spaces"
                ),
                Span::new(line.number, 1),
            );
        } else if line.indent == element_indent {
            if starts_attribute {
                return err(
                    "attribute line must be indented under a NODE or RELATIONSHIP declaration",
                    line.tokens[0].span,
                );
            }
            b.declaration(line, &mut plan.warnings)?;
        } else {
            let attribute_indent = *b.attribute_indent.get_or_insert(line.indent);
            if line.indent != attribute_indent {
                return err(
                    format!("inconsistent indentation: attribute lines here are indented {attribute_indent} spaces"),
                    Span::new(line.number, 1),
                );
            }
            b.attribute(line)?;
        }
    }
    if let Some(b) = current.take() {
        plan.entities.push(b.finish()?);
    }
    Ok(plan)
}
