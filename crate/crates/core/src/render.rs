//! Static SVG rendering of storyboard layouts, one document per shot.

use std::fmt::Write;

use crate::keypoints::KeypointScheme;
use crate::types::{Shot, Storyboard};

/// Stroke colors; character `id` uses `PALETTE[id % PALETTE.len()]`.
pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];
pub const FILM_SET_COLOR: &str = "#555555";

#[derive(Debug, Clone, PartialEq)]
pub struct RenderStyle {
    pub stroke_width: f64,
    pub point_radius: f64,
    pub font_size: f64,
    pub background: String,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self {
            stroke_width: 2.0,
            point_radius: 2.5,
            font_size: 12.0,
            background: "#ffffff".into(),
        }
    }
}

pub fn color_for(character_id: u32) -> &'static str {
    PALETTE[character_id as usize % PALETTE.len()]
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

struct Canvas {
    w: f64,
    h: f64,
}

impl Canvas {
    fn x(&self, v: f64) -> f64 {
        v.clamp(0.0, self.w)
    }
    fn y(&self, v: f64) -> f64 {
        v.clamp(0.0, self.h)
    }
}

/// Renders one shot. Film sets are dashed grey boxes with their category;
/// characters are boxes in their palette color with the mention as label,
/// visible keypoints as circles joined by the skeleton edges.
pub fn render_shot(shot: &Shot, scheme: &KeypointScheme, style: &RenderStyle) -> String {
    let c = Canvas {
        w: shot.frame_width,
        h: shot.frame_height,
    };
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = c.w,
        h = c.h
    )
    .unwrap();
    writeln!(s, r#"<rect x="0" y="0" width="{}" height="{}" fill="{}"/>"#, c.w, c.h, style.background).unwrap();
    let label_y = |y: f64| c.y((y - 3.0).max(style.font_size));

    for f in &shot.film_sets {
        let (x0, y0, x1, y1) = (c.x(f.bbox.x_min), c.y(f.bbox.y_min), c.x(f.bbox.x_max), c.y(f.bbox.y_max));
        writeln!(
            s,
            r#"<rect class="film-set" x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="{FILM_SET_COLOR}" stroke-width="{}" stroke-dasharray="6 3"/>"#,
            x1 - x0,
            y1 - y0,
            style.stroke_width
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{x0:.2}" y="{:.2}" font-size="{}" fill="{FILM_SET_COLOR}">{}</text>"#,
            label_y(y0),
            style.font_size,
            escape(&f.category)
        )
        .unwrap();
    }

    for ch in &shot.characters {
        let color = color_for(ch.character_id);
        let (x0, y0, x1, y1) = (c.x(ch.bbox.x_min), c.y(ch.bbox.y_min), c.x(ch.bbox.x_max), c.y(ch.bbox.y_max));
        writeln!(
            s,
            r#"<g class="character" data-id="{}">"#,
            ch.character_id
        )
        .unwrap();
        writeln!(
            s,
            r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="{color}" stroke-width="{}"/>"#,
            x1 - x0,
            y1 - y0,
            style.stroke_width
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{x0:.2}" y="{:.2}" font-size="{}" fill="{color}">{}</text>"#,
            label_y(y0),
            style.font_size,
            escape(&ch.mention)
        )
        .unwrap();
        if let Some(k) = &ch.keypoints {
            let pts = k.points();
            for (a, b) in scheme.edges_for(k.layout()) {
                let (p, q) = (&pts[a], &pts[b]);
                if p.visible && q.visible {
                    writeln!(
                        s,
                        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="{}"/>"#,
                        c.x(p.x),
                        c.y(p.y),
                        c.x(q.x),
                        c.y(q.y),
                        style.stroke_width / 2.0
                    )
                    .unwrap();
                }
            }
            for p in pts.iter().filter(|p| p.visible) {
                writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="{}" fill="{color}"/>"#,
                    c.x(p.x),
                    c.y(p.y),
                    style.point_radius
                )
                .unwrap();
            }
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

/// One SVG per shot, in shot order.
pub fn render(sb: &Storyboard, scheme: &KeypointScheme, style: &RenderStyle) -> Vec<String> {
    sb.shots.iter().map(|s| render_shot(s, scheme, style)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{
        BoundingBox, CharacterAnnotation, FilmSetAnnotation, Keypoint, KeypointLayout, KeypointSet,
        Provenance, Synopsis,
    };

    fn character(id: u32, bbox: BoundingBox, kps: Option<KeypointSet>) -> CharacterAnnotation {
        CharacterAnnotation::new(id, "he", bbox, kps).unwrap()
    }

    fn board() -> Storyboard {
        let big = BoundingBox::new(100.0, 50.0, 300.0, 500.0);
        let pts: Vec<Keypoint> = (0..93)
            .map(|i| {
                if i < 10 {
                    Keypoint::hidden()
                } else {
                    Keypoint::visible(100.0 + i as f64, 60.0 + 4.0 * i as f64)
                }
            })
            .collect();
        let kps = KeypointSet::new(KeypointLayout::Sampled93, pts).unwrap();
        let mut s1 = Shot::empty(512.0, 512.0);
        s1.characters.push(character(3, big, Some(kps)));
        s1.film_sets.push(FilmSetAnnotation {
            category: "fork & knife".into(),
            bbox: BoundingBox::new(-20.0, 10.0, 600.0, 40.0),
        });
        let mut s2 = Shot::empty(512.0, 512.0);
        s2.characters.push(character(7, BoundingBox::new(1.0, 1.0, 20.0, 20.0), None));
        let mut s3 = Shot::empty(512.0, 512.0);
        s3.characters.push(character(3, BoundingBox::new(5.0, 5.0, 25.0, 25.0), None));
        Storyboard {
            id: "r".into(),
            shots: vec![s1, s2, s3],
            synopsis: Synopsis::condensed("x"),
            summative: None,
            provenance: Provenance::Decoded,
        }
    }

    fn numbers(svg: &str, attr: &str) -> Vec<f64> {
        svg.split(&format!(" {attr}=\""))
            .skip(1)
            .map(|rest| rest[..rest.find('"').unwrap()].parse().unwrap())
            .collect()
    }

    #[test]
    fn visible_points_only_and_coordinates_inside_viewbox() {
        let svgs = render(&board(), &KeypointScheme::default(), &RenderStyle::default());
        assert_eq!(svgs.len(), 3);
        assert_eq!(svgs[0].matches("<circle").count(), 83);
        for attr in ["x", "y", "cx", "cy", "x1", "y1", "x2", "y2"] {
            for v in numbers(&svgs[0], attr) {
                assert!((0.0..=512.0).contains(&v), "{attr}={v}");
            }
        }
        assert!(svgs[0].contains("fork &amp; knife"));
    }

    #[test]
    fn box_only_has_no_skeleton_and_colors_follow_id() {
        let svgs = render(&board(), &KeypointScheme::default(), &RenderStyle::default());
        assert!(!svgs[1].contains("<line") && !svgs[1].contains("<circle"));
        assert!(svgs[1].contains(color_for(7)));
        assert!(svgs[0].contains(color_for(3)) && svgs[2].contains(color_for(3)));
        assert_ne!(color_for(3), color_for(7));
    }
}
