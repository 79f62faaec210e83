pub mod featloc;
pub mod flc;
pub mod learn;
pub mod mine;
pub mod modelx;
pub mod symex;
