//! Conversion of Smart Flow / Smart Forms workflow specifications into BPMN 2.0.

pub mod batch;
pub mod builder;
pub mod corpus;
pub mod ingest;
pub mod kb;
pub mod layout;
pub mod lifting;
pub mod pipeline;
pub mod reasoner;
pub mod serializer;
pub mod validator;
pub mod vocab;
