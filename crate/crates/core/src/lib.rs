pub mod design;
pub mod element;
pub mod material;
pub mod mesh;
