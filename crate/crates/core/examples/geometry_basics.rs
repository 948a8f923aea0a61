// Polygon measures, hulls, minimum-area rectangles and raster IoU.
//
//     cargo run --example geometry_basics

use bladeqc::geometry::{aabb, area, convex_hull, iou, min_area_rect, Point2, Polygon};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A leading-edge erosion patch traced at a slant, as flat [x0, y0, x1, y1, ...].
    let patch: Polygon = serde_json::from_str("[100, 120, 260, 60, 290, 140, 130, 200]")?;
    println!("area          {:.1} px²", area(&patch));

    let b = aabb(&patch);
    println!("aabb          x {}..{}  y {}..{}  ({:.0} px²)", b.x_min, b.x_max, b.y_min, b.y_max, b.area());

    let r = min_area_rect(&patch);
    println!(
        "min rect      {:.1} × {:.1} at {:.2}°  ({:.0} px², {:.0}% of the aabb)",
        r.width(),
        r.height(),
        r.angle(),
        r.area(),
        100.0 * r.area() / b.area()
    );

    let scatter: Vec<Point2> = [(0.0, 0.0), (5.0, 1.0), (9.0, 0.0), (4.0, 4.0), (8.0, 7.0), (1.0, 8.0)]
        .iter()
        .map(|&(x, y)| Point2::new(x, y))
        .collect();
    let hull = convex_hull(&scatter)?;
    println!("hull          {} of {} points, area {}", hull.vertices().len(), scatter.len(), hull.area());

    // IoU is measured on the pixel grid of the image frame.
    let gt = Polygon::rect(0.0, 0.0, 100.0, 100.0)?;
    let shifted = gt.translate(50.0, 0.0);
    println!("iou           {:.4}", iou(&gt, &shifted, 256, 256)?);

    // Self-intersecting outlines are rejected up front.
    let bowtie = Polygon::from_flat(&[0.0, 0.0, 10.0, 10.0, 10.0, 0.0, 0.0, 6.0]);
    println!("bowtie        {}", bowtie.unwrap_err());
    Ok(())
}
