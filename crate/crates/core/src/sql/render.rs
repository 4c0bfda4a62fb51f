use std::fmt::Write;

use super::ast::*;

/// Canonical surface form: uppercase keywords, single spaces, explicit
/// `JOIN ... ON`, columns as they are stored in the AST.
pub fn render_sql(q: &SqlQuery) -> String {
    let mut out = String::new();
    write_query(&mut out, q);
    out
}

fn write_query(out: &mut String, q: &SqlQuery) {
    out.push_str("SELECT ");
    if q.select.distinct {
        out.push_str("DISTINCT ");
    }
    write_list(out, &q.select.items, write_unit);
    out.push_str(" FROM ");
    for (i, t) in q.from.tables.iter().enumerate() {
        if i > 0 {
            out.push_str(" JOIN ");
        }
        out.push_str(&t.name);
        if let Some(a) = &t.alias {
            let _ = write!(out, " AS {a}");
        }
        for (j, c) in t.on.iter().enumerate() {
            out.push_str(if j == 0 { " ON " } else { " AND " });
            write_column(out, &c.left);
            out.push_str(" = ");
            write_column(out, &c.right);
        }
    }
    if let Some(c) = &q.where_clause {
        out.push_str(" WHERE ");
        write_condition(out, c, false);
    }
    if !q.group_by.is_empty() {
        out.push_str(" GROUP BY ");
        write_list(out, &q.group_by, write_column);
    }
    if let Some(c) = &q.having {
        out.push_str(" HAVING ");
        write_condition(out, c, false);
    }
    if !q.order_by.is_empty() {
        out.push_str(" ORDER BY ");
        write_list(out, &q.order_by, |out, o| {
            write_unit(out, &o.unit);
            out.push_str(match o.direction {
                Direction::Asc => " ASC",
                Direction::Desc => " DESC",
            });
        });
    }
    if let Some(n) = q.limit {
        let _ = write!(out, " LIMIT {n}");
    }
    if let Some((op, rhs)) = &q.set_op {
        let _ = write!(out, " {} ", op.keyword());
        write_query(out, rhs);
    }
}

fn write_list<T>(out: &mut String, items: &[T], mut f: impl FnMut(&mut String, &T)) {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        f(out, item);
    }
}

pub(crate) fn write_column(out: &mut String, c: &ColumnRef) {
    if let Some(t) = &c.table {
        out.push_str(t);
        out.push('.');
    }
    out.push_str(&c.column);
}

fn write_unit(out: &mut String, u: &ValueUnit) {
    match u.agg.keyword() {
        Some(kw) => {
            out.push_str(kw);
            out.push('(');
            if u.distinct {
                out.push_str("DISTINCT ");
            }
            write_column(out, &u.column);
            out.push(')');
        }
        None => write_column(out, &u.column),
    }
}

fn write_condition(out: &mut String, c: &Condition, inside_and: bool) {
    match c {
        Condition::And(parts) => {
            for (i, p) in parts.iter().enumerate() {
                if i > 0 {
                    out.push_str(" AND ");
                }
                write_condition(out, p, true);
            }
        }
        Condition::Or(parts) => {
            if inside_and {
                out.push('(');
            }
            for (i, p) in parts.iter().enumerate() {
                if i > 0 {
                    out.push_str(" OR ");
                }
                write_condition(out, p, false);
            }
            if inside_and {
                out.push(')');
            }
        }
        Condition::Predicate(p) => {
            write_unit(out, &p.left);
            out.push(' ');
            out.push_str(p.op.symbol());
            out.push(' ');
            match &p.right {
                Operand::Literal(l) => write_literal(out, l),
                Operand::Column(col) => write_column(out, col),
                Operand::Subquery(q) => {
                    out.push('(');
                    write_query(out, q);
                    out.push(')');
                }
                Operand::Range(lo, hi) => {
                    write_literal(out, lo);
                    out.push_str(" AND ");
                    write_literal(out, hi);
                }
            }
        }
    }
}

fn write_literal(out: &mut String, l: &Literal) {
    match l {
        Literal::Number(n) => out.push_str(n),
        Literal::Str(s) => {
            out.push('\'');
            out.push_str(&s.replace('\'', "''"));
            out.push('\'');
        }
    }
}
