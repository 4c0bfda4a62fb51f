use super::ast::*;
use super::SqlError;
use crate::schema::DatabaseSchema;

struct Scope<'p> {
    /// (table index, alias) in FROM order.
    tables: Vec<(usize, Option<String>)>,
    parent: Option<&'p Scope<'p>>,
}

impl Scope<'_> {
    fn lookup_qualifier(&self, schema: &DatabaseSchema, name: &str) -> Option<usize> {
        let mut scope = Some(self);
        while let Some(s) = scope {
            if let Some((t, _)) = s
                .tables
                .iter()
                .find(|(_, a)| a.as_deref().is_some_and(|a| a.eq_ignore_ascii_case(name)))
            {
                return Some(*t);
            }
            if let Some((t, _)) = s.tables.iter().find(|(t, _)| schema.table(*t).name.eq_ignore_ascii_case(name)) {
                return Some(*t);
            }
            scope = s.parent;
        }
        // Columns may name a table that the FROM clause forgot; completion
        // relies on this.
        schema.table_index(name)
    }
}

/// Rewrites every column to `Table.Column` with schema casing and drops
/// table aliases.
pub fn resolve(q: &SqlQuery, schema: &DatabaseSchema) -> Result<SqlQuery, SqlError> {
    resolve_level(q, schema, None)
}

fn resolve_level(q: &SqlQuery, schema: &DatabaseSchema, parent: Option<&Scope>) -> Result<SqlQuery, SqlError> {
    let mut tables = Vec::with_capacity(q.from.tables.len());
    for t in &q.from.tables {
        let idx = schema.table_index(&t.name).ok_or_else(|| SqlError::UnknownTable(t.name.clone()))?;
        tables.push((idx, t.alias.clone()));
    }
    let scope = Scope { tables, parent };
    let col = |c: &ColumnRef| resolve_column(c, schema, &scope);
    let unit = |u: &ValueUnit| -> Result<ValueUnit, SqlError> {
        Ok(ValueUnit { agg: u.agg, distinct: u.distinct, column: col(&u.column)? })
    };

    let from = FromClause {
        tables: q
            .from
            .tables
            .iter()
            .zip(&scope.tables)
            .map(|(t, (idx, _))| {
                Ok(TableRef {
                    name: schema.table(*idx).name.clone(),
                    alias: None,
                    on: t
                        .on
                        .iter()
                        .map(|c| Ok(JoinCondition { left: col(&c.left)?, right: col(&c.right)? }))
                        .collect::<Result<_, SqlError>>()?,
                })
            })
            .collect::<Result<_, SqlError>>()?,
    };
    let resolve_cond = |c: &Condition| resolve_condition(c, schema, &scope);
    Ok(SqlQuery {
        select: Select {
            distinct: q.select.distinct,
            items: q.select.items.iter().map(unit).collect::<Result<_, _>>()?,
        },
        from,
        where_clause: q.where_clause.as_ref().map(resolve_cond).transpose()?,
        group_by: q.group_by.iter().map(col).collect::<Result<_, _>>()?,
        having: q.having.as_ref().map(resolve_cond).transpose()?,
        order_by: q
            .order_by
            .iter()
            .map(|o| Ok(OrderItem { unit: unit(&o.unit)?, direction: o.direction }))
            .collect::<Result<_, SqlError>>()?,
        limit: q.limit,
        set_op: match &q.set_op {
            Some((op, rhs)) => Some((*op, Box::new(resolve_level(rhs, schema, parent)?))),
            None => None,
        },
    })
}

fn resolve_condition(c: &Condition, schema: &DatabaseSchema, scope: &Scope) -> Result<Condition, SqlError> {
    Ok(match c {
        Condition::And(v) => Condition::And(
            v.iter().map(|x| resolve_condition(x, schema, scope)).collect::<Result<_, _>>()?,
        ),
        Condition::Or(v) => Condition::Or(
            v.iter().map(|x| resolve_condition(x, schema, scope)).collect::<Result<_, _>>()?,
        ),
        Condition::Predicate(p) => Condition::Predicate(Predicate {
            left: ValueUnit {
                agg: p.left.agg,
                distinct: p.left.distinct,
                column: resolve_column(&p.left.column, schema, scope)?,
            },
            op: p.op,
            right: match &p.right {
                Operand::Column(c) => Operand::Column(resolve_column(c, schema, scope)?),
                Operand::Subquery(q) => Operand::Subquery(Box::new(resolve_level(q, schema, Some(scope))?)),
                other => other.clone(),
            },
        }),
    })
}

fn resolve_column(c: &ColumnRef, schema: &DatabaseSchema, scope: &Scope) -> Result<ColumnRef, SqlError> {
    if let Some(q) = &c.table {
        let t = scope
            .lookup_qualifier(schema, q)
            .ok_or_else(|| SqlError::UnknownTable(q.clone()))?;
        let table = &schema.table(t).name;
        if c.is_star() {
            return Ok(ColumnRef::new(table, "*"));
        }
        let id = schema
            .column_index(t, &c.column)
            .ok_or_else(|| SqlError::UnresolvableColumn(format!("{q}.{}", c.column)))?;
        return Ok(ColumnRef::new(table, &schema.column(id).name));
    }
    if c.is_star() {
        return Ok(ColumnRef::star());
    }
    let mut level = Some(scope);
    while let Some(s) = level {
        let mut owners: Vec<usize> = s
            .tables
            .iter()
            .map(|(t, _)| *t)
            .filter(|&t| schema.column_index(t, &c.column).is_some())
            .collect();
        owners.dedup();
        owners.sort_unstable();
        owners.dedup();
        match owners.as_slice() {
            [t] => {
                let id = schema.column_index(*t, &c.column).unwrap();
                return Ok(ColumnRef::new(&schema.table(*t).name, &schema.column(id).name));
            }
            [] => level = s.parent,
            many => {
                return Err(SqlError::AmbiguousColumn {
                    column: c.column.clone(),
                    candidates: many.iter().map(|&t| schema.table(t).name.clone()).collect(),
                })
            }
        }
    }
    Err(SqlError::UnresolvableColumn(c.column.clone()))
}
