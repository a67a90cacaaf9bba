pub mod oracle;
pub mod quadrature;
