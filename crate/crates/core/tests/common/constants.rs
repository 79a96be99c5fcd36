//! Reference values computed with 200-digit arithmetic outside this crate,
//! truncated to 180 decimal places.

/// ln 2
#[allow(dead_code)]
pub const LN2: &str = "0.693147180559945309417232121458176568075500134360255254120680009493393621969694715605863326996418687542001481020570685733685520235758130557032670751635075961930727570828371435190307";
/// ln 4: flat noise 1 on [0, 1], P = 3
#[allow(dead_code)]
pub const C_FLAT: &str = "1.386294361119890618834464242916353136151000268720510508241360018986787243939389431211726653992837375084002962041141371467371040471516261114065341503270151923861455141656742870380614";
/// ln(7/2) - (2 ln 2 - 1): noise 1 + f on [0, 1], P = 2
#[allow(dead_code)]
pub const C_AFFINE: &str = "0.866468607375477376853656379068650025410584326501095426097350121457398996842985120970068517598615464367057251144139083710667191550403395172050945840258672890115641755619160477811338";
/// 1 + sqrt(1/5): water level for noise 1 + f on [0, 1], P = 1/10
#[allow(dead_code)]
pub const L_CLIPPED: &str = "1.447213595499957939281834733746255247088123671922305144854179449082104185127560979882882881675756454993901635230154756700850653544889414772717272024306690541773355634638375833162255";
/// sqrt(1/5) - ln(1 + sqrt(1/5)): capacity for noise 1 + f on [0, 1], P = 1/10
#[allow(dead_code)]
pub const C_CLIPPED: &str = "0.077573546097459369667223365476804075640239880310648232028805216485636189403473372180077064603204097854651465762148196005754567600066884692748350339539057689436300875346758870574870";
/// ln(16 - 8 sqrt 3): noise 2 + sin(2 pi f) on [0, 1], P = 2
#[allow(dead_code)]
pub const C_SINE: &str = "0.762483644755019219626650017066561260199518431613249282593567771559720680492640170743370967539154279069539006496107077881246743845168020138371248909195307208886351583708857347400450";
/// sqrt(1/5)
#[allow(dead_code)]
pub const SQRT_FIFTH: &str = "0.447213595499957939281834733746255247088123671922305144854179449082104185127560979882882881675756454993901635230154756700850653544889414772717272024306690541773355634638375833162255";
