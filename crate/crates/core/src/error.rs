use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("nonpositive length on edge {0}")]
    NonpositiveLength(String),
    #[error("nonpositive stiffness on edge {0}")]
    NonpositiveStiffness(String),
    #[error("non-unimodular weight at vertex {vertex}, edge {edge}")]
    NonUnimodularWeight { vertex: String, edge: String },
    #[error("graph is disconnected")]
    Disconnected,
    #[error("cell has no soft edge")]
    MissingSoftEdge,
    #[error("cell has no stiff edge")]
    MissingStiffEdge,
    #[error("interface is empty")]
    EmptyInterface,
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("unknown edge {0}")]
    UnknownEdge(String),
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("edge {edge} is not incident to vertex {vertex}")]
    NotIncident { vertex: String, edge: String },
    #[error("Dirichlet pole on edge {edge} (sin argument {arg})")]
    DirichletPole { edge: String, arg: f64 },
    #[error("interior resonance at z = {0}")]
    InteriorResonance(f64),
    #[error("refine grid: {0}")]
    RefineGrid(String),
    #[error("z = {z} is not an eigenvalue here (relative singular value {sigma:e})")]
    NotAnEigenvalue { z: f64, sigma: f64 },
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("need at least two interface vertices")]
    TooFewInterfaceVertices,
    #[error("soft Dirichlet pole at z = {0}")]
    SoftDirichletPole(f64),
    #[error("tan pole at z = {0}")]
    TanPole(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
