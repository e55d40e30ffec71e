//! Built-in scenarios.

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

macro_rules! preset {
    ($name:literal, $summary:literal, $($part:expr),+ $(,)?) => {
        Preset { name: $name, summary: $summary, text: concat!($($part),+) }
    };
}

macro_rules! header {
    ($name:literal, $model:literal) => {
        concat!("[scenario]\nname = \"", $name, "\"\nmodel = \"", $model, "\"\n")
    };
}

macro_rules! square_cylinder {
    () => {
        "\n[lattice]\ngeometry = \"square\"\nextent_x = 7\nextent_y = 6\nboundary = \"cylinder\"\n\n[charges]\nsource = [1, 0]\nsink = [5, 3]\n"
    };
}

macro_rules! hex_cylinder {
    () => {
        "\n[lattice]\ngeometry = \"hexagonal\"\nextent_x = 8\nextent_y = 4\nboundary = \"cylinder\"\n"
    };
}

pub const PRESETS: &[Preset] = &[
    preset!(
        "square-L-resonant",
        "L string, 7x6 cylinder, m=12 g=24 (2m=g), J in {0,1,2}; the resonant L-string quench",
        header!("square-L-resonant", "minimal_model"),
        square_cylinder!(),
        "\n[string]\nshape = \"l_shaped\"\n\n[couplings]\nmass = 12\nefield = 24\nplaq = [0, 1, 2]\n",
        "\n[time]\nt_max = 10\nn_points = 201\n",
    ),
    preset!(
        "square-L-offres",
        "L string, 7x6 cylinder, m=12 g=8, J in {0,1,2}; the off-resonant L-string quench",
        header!("square-L-offres", "minimal_model"),
        square_cylinder!(),
        "\n[string]\nshape = \"l_shaped\"\n\n[couplings]\nmass = 12\nefield = 8\nplaq = [0, 1, 2]\n",
        "\n[time]\nt_max = 10\nn_points = 201\n",
    ),
    preset!(
        "square-diag-resonant",
        "staircase string, 7x6 cylinder, m=12 g=24, J in {0,1,2}; the resonant diagonal-string quench",
        header!("square-diag-resonant", "minimal_model"),
        square_cylinder!(),
        "\n[string]\nshape = \"diagonal\"\n\n[couplings]\nmass = 12\nefield = 24\nplaq = [0, 1, 2]\n",
        "\n[time]\nt_max = 10\nn_points = 201\n",
    ),
    preset!(
        "hex-S-resonant",
        "S string of length 5, 8x4 hexagonal cylinder, m=2 g=4, J in {0,1,2}; the resonant hexagonal quench",
        header!("hex-S-resonant", "minimal_model"),
        hex_cylinder!(),
        "\n[charges]\nsource = [1, 0]\nsink = [5, 1]\n\n[string]\nshape = \"s_shaped_hex\"\n",
        "\n[couplings]\nmass = 2\nefield = 4\nplaq = [0, 1, 2]\n",
        "\n[time]\nt_max = 10\nn_points = 201\n",
    ),
    preset!(
        "hex-S-offres",
        "S string, 8x4 hexagonal cylinder, m=12 g=8, J in {0,1,2}; the off-resonant hexagonal fidelities",
        header!("hex-S-offres", "minimal_model"),
        hex_cylinder!(),
        "\n[charges]\nsource = [1, 0]\nsink = [5, 1]\n\n[string]\nshape = \"s_shaped_hex\"\n",
        "\n[couplings]\nmass = 12\nefield = 8\nplaq = [0, 1, 2]\n",
        "\n[time]\nt_max = 10\nn_points = 201\n",
    ),
    preset!(
        "hex-1d-resonant",
        "straight hexagonal string with no flippable plaquette, m=2 g=4, J in {0,2}; J drops out",
        header!("hex-1d-resonant", "minimal_model"),
        hex_cylinder!(),
        "\n[charges]\nsource = [1, 2]\nsink = [6, 2]\n\n[string]\nshape = \"straight\"\n",
        "\n[couplings]\nmass = 2\nefield = 4\nplaq = [0, 2]\n",
        "\n[time]\nt_max = 10\nn_points = 201\n",
    ),
    preset!(
        "qlm1d-resonant",
        "1+1D link model, 8-site chain spanned by a 7-link string, m=12 g=24, full ED; the J=0 reference",
        header!("qlm1d-resonant", "qlm1d"),
        "\n[lattice]\nextent_x = 8\n\n[charges]\nsource = [1, 0]\nsink = [8, 0]\n\n[string]\nshape = \"straight\"\n",
        "\n[couplings]\nmass = 12\nefield = 24\n",
        "\n[time]\nt_max = 10\nn_points = 201\n",
    ),
    preset!(
        "z2-diag-2ndres",
        "Z2 staircase string on a 3x3 open square patch at m=g=4, J=0, full ED; second-order L-to-L fluctuations",
        header!("z2-diag-2ndres", "z2_square"),
        "\n[lattice]\nextent_x = 3\nextent_y = 3\n\n[charges]\nsource = [0, 0]\nsink = [2, 2]\n\n[string]\nshape = \"diagonal\"\n",
        "\n[couplings]\nmass = 4\nefield = 4\nplaq = 0\n",
        "\n[time]\nt_max = 20\nn_points = 401\n",
    ),
    preset!(
        "z2-diag-detuned",
        "as z2-diag-2ndres but m=8 g=4 (m=2g); the corner process is off resonance",
        header!("z2-diag-detuned", "z2_square"),
        "\n[lattice]\nextent_x = 3\nextent_y = 3\n\n[charges]\nsource = [0, 0]\nsink = [2, 2]\n\n[string]\nshape = \"diagonal\"\n",
        "\n[couplings]\nmass = 8\nefield = 4\nplaq = 0\n",
        "\n[time]\nt_max = 20\nn_points = 401\n",
    ),
    preset!(
        "square-L3-fulled",
        "L string of length 3 on a 4x3 open square patch, m=1.5 g=3, J in {0,1}, full U(1) ED",
        header!("square-L3-fulled", "u1_square"),
        "\n[lattice]\nextent_x = 4\nextent_y = 3\n\n[charges]\nsource = [1, 0]\nsink = [3, 1]\n\n[string]\nshape = \"l_shaped\"\n",
        "\n[couplings]\nmass = 1.5\nefield = 3\nplaq = [0, 1]\n",
        "\n[time]\nt_max = 10\nn_points = 201\n",
    ),
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}

/// The listing printed by `presets`.
pub fn table() -> String {
    let width = PRESETS.iter().map(|p| p.name.len()).max().unwrap_or(0);
    PRESETS.iter().map(|p| format!("{:width$}  {}\n", p.name, p.summary)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse;

    #[test]
    fn every_preset_parses_under_its_own_name() {
        for p in PRESETS {
            let s = parse(p.text).unwrap_or_else(|e| panic!("{}: {e}", p.name));
            assert_eq!(s.name, p.name);
        }
    }

    #[test]
    fn listing_has_the_required_presets() {
        let t = table();
        for name in ["square-L-resonant", "z2-diag-2ndres", "hex-1d-resonant"] {
            assert!(t.lines().any(|l| l.starts_with(name)));
        }
        let z2 = parse(find("z2-diag-2ndres").unwrap().text).unwrap();
        assert_eq!(z2.mass, z2.efield);
    }
}
