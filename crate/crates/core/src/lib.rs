pub mod asymlab;
pub mod cli;
pub mod estimators;
pub mod fft;
pub mod genproc;
pub mod imagepipe;
pub mod linalg;
pub mod metrics;
pub mod unmixer;
