pub mod canonical;
pub mod cli;
pub mod connection;
pub mod forms;
pub mod jetchart;
pub mod harness;
pub mod lagrangian;
pub mod noether;
pub mod problem;
pub mod symexpr;

pub use canonical::GeometryError;
pub use connection::{Connection, JetField2};
pub use forms::{Form, FormError, VectorField};
pub use jetchart::{make_chart, ChartError, JetChart, SectionE, SectionJ1};
pub use symexpr::{Expr, ExprError, Rational, Symbol};
