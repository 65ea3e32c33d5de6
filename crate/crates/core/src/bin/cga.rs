use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cga_core::baseline::{KdTree, Octree};
use cga_core::bench::{run_plan, BenchPlan, Operation, Structure};
use cga_core::codec::{decode_sequence, encode_sequence, split_frames, write_container};
use cga_core::geometry::{render_view, ViewTransform};
use cga_core::io::{grid_downsample, load_cloud, write_ply, write_report, PlyFormat};
use cga_core::{CompressedGeometricArray, Error, MergePolicy, OpMetrics, PointSoup, QuantizedPoint, Result};

#[derive(Parser)]
#[command(name = "cga", version, about = "Compressed geometric arrays for voxelized point clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Coordinate bit depth used to voxelize input clouds.
    #[arg(long, default_value_t = 10)]
    qp: u8,
    #[arg(long, value_enum, default_value_t = StructureArg::Cga)]
    structure: StructureArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StructureArg {
    Cga,
    Octree,
    Kdtree,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Orthogonal,
    Perspective,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    BaseWins,
    Average,
}

#[derive(Subcommand)]
enum Command {
    /// Build a structure and print its cost and footprint.
    Build {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Write the measurement as a CSV report.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Union of two clouds, written as PLY.
    Merge {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        input2: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = PolicyArg::BaseWins)]
        policy: PolicyArg,
        #[arg(long)]
        binary: bool,
    },
    /// Render a view of a cloud to a binary PPM image.
    Project {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 10)]
        qp: u8,
        #[arg(long, value_enum, default_value_t = ModeArg::Orthogonal)]
        mode: ModeArg,
        #[arg(long, default_value_t = 1.0)]
        mx: f64,
        #[arg(long, default_value_t = 1.0)]
        my: f64,
        /// Focal distance for perspective projection.
        #[arg(long, default_value_t = 1.0)]
        d: f64,
        /// Rotation about the y axis applied before projecting.
        #[arg(long, default_value_t = 0.0)]
        theta_deg: f64,
        #[arg(long, default_value_t = 512)]
        width: usize,
        #[arg(long, default_value_t = 512)]
        height: usize,
    },
    /// Nearest stored point to a query.
    Nn {
        #[arg(long)]
        input: PathBuf,
        /// Query as `x,y,z`.
        #[arg(long, value_parser = parse_point)]
        query: QuantizedPoint,
        #[command(flatten)]
        common: Common,
    },
    /// Encode frames into a CGA1 container. The first frame is intra coded.
    Compress {
        /// Frames in display order.
        #[arg(long, num_args = 1.., required = true)]
        frames: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 10)]
        qp: u8,
        /// Attribute quantizer step.
        #[arg(long, default_value_t = 1)]
        step: u16,
    },
    /// Decode a CGA1 container into `frame_<n>.ply` files.
    Decompress {
        #[arg(long)]
        input: PathBuf,
        /// Output directory.
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        binary: bool,
    },
    /// Grid downsampling with centroid positions and averaged colors.
    Downsample {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 10)]
        qp: u8,
        #[arg(long)]
        gridstep: u32,
        #[arg(long)]
        binary: bool,
    },
    /// Run a benchmark plan and emit a CSV report.
    Bench {
        #[arg(long, num_args = 0..)]
        input: Vec<PathBuf>,
        /// Add a seeded uniform cloud with this many points.
        #[arg(long)]
        synthetic: Option<usize>,
        #[arg(long, value_delimiter = ',', value_parser = parse_operation)]
        ops: Option<Vec<Operation>>,
        #[arg(long, value_delimiter = ',', value_parser = parse_structure)]
        structures: Option<Vec<Structure>>,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        gridsteps: Vec<u32>,
        #[arg(long, default_value_t = 10)]
        qp: u8,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Nearest-neighbor queries per cell.
        #[arg(long, default_value_t = 1000)]
        queries: usize,
        /// Report path; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn parse_point(s: &str) -> std::result::Result<QuantizedPoint, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [x, y, z] = parts.as_slice() else {
        return Err(format!("expected x,y,z, got `{s}`"));
    };
    let c = |v: &str| v.parse::<u32>().map_err(|e| format!("`{v}`: {e}"));
    Ok(QuantizedPoint::new(c(x)?, c(y)?, c(z)?))
}

fn parse_operation(s: &str) -> std::result::Result<Operation, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_structure(s: &str) -> std::result::Result<Structure, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn ply_format(binary: bool) -> PlyFormat {
    if binary {
        PlyFormat::BinaryLittleEndian
    } else {
        PlyFormat::Ascii
    }
}

fn print_metrics(label: &str, points: usize, m: OpMetrics) {
    println!(
        "{label}: points={points} wall_ns={} element_reads={} node_hops={} bytes={}",
        m.wall_ns, m.element_reads, m.node_hops, m.bytes
    );
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Build { input, common, output } => {
            let soup = load_cloud(&input, common.qp)?;
            let (name, m) = match common.structure {
                StructureArg::Cga => ("cga", CompressedGeometricArray::build(&soup).1),
                StructureArg::Octree => ("octree", Octree::build(&soup)?.1),
                StructureArg::Kdtree => ("kdtree", KdTree::build(&soup)?.1),
            };
            print_metrics(name, soup.len(), m);
            if let Some(out) = output {
                let row = cga_core::io::ReportRow::new(name, "build", soup.len() as u64, m);
                write_file(&out, &write_report(&[row])?)?;
            }
        }
        Command::Merge {
            input,
            input2,
            output,
            common,
            policy,
            binary,
        } => {
            let a = load_cloud(&input, common.qp)?;
            let b = load_cloud(&input2, common.qp)?;
            let policy = match policy {
                PolicyArg::BaseWins => MergePolicy::BaseWins,
                PolicyArg::Average => MergePolicy::Average,
            };
            let (merged, m) = match common.structure {
                StructureArg::Cga => {
                    let (c, m) = CompressedGeometricArray::from_soup(&a).merge(&CompressedGeometricArray::from_soup(&b), policy)?;
                    (c.to_soup(), m)
                }
                StructureArg::Octree => {
                    let (t, m) = Octree::build(&a)?.0.merge(&Octree::build(&b)?.0, policy)?;
                    (t.to_soup(), m)
                }
                StructureArg::Kdtree => return Err(Error::InvalidArgument("--structure kdtree does not support merge".into())),
            };
            print_metrics("merge", merged.len(), m);
            write_file(&output, &write_ply(&merged, ply_format(binary)))?;
        }
        Command::Project {
            input,
            output,
            qp,
            mode,
            mx,
            my,
            d,
            theta_deg,
            width,
            height,
        } => {
            let soup = load_cloud(&input, qp)?;
            let view = match mode {
                ModeArg::Orthogonal => ViewTransform::orthogonal(mx, my),
                ModeArg::Perspective => ViewTransform::perspective(d),
            }
            .rotated(theta_deg.to_radians());
            let (image, m) = render_view(&CompressedGeometricArray::from_soup(&soup), view, width, height)?;
            print_metrics("project", soup.len(), m);
            write_file(&output, &image.to_ppm())?;
        }
        Command::Nn { input, query, common } => {
            let soup = load_cloud(&input, common.qp)?;
            let (n, m) = match common.structure {
                StructureArg::Cga => CompressedGeometricArray::from_soup(&soup).nearest_neighbor(query)?,
                StructureArg::Octree => Octree::build(&soup)?.0.nearest_neighbor(query)?,
                StructureArg::Kdtree => KdTree::build(&soup)?.0.nearest_neighbor(query)?,
            };
            let c = n.color;
            println!(
                "point={},{},{} color={},{},{} distance={}",
                n.point.x,
                n.point.y,
                n.point.z,
                c.r,
                c.g,
                c.b,
                n.distance()
            );
            print_metrics("nn", soup.len(), m);
        }
        Command::Compress { frames, output, qp, step } => {
            let soups = frames.iter().map(|f| load_cloud(f, qp)).collect::<Result<Vec<PointSoup>>>()?;
            let coded = encode_sequence(&soups, step)?;
            let bytes = write_container(&coded);
            let ratio = cga_core::codec::compression_ratio(&[&bytes], &soups);
            println!("frames={} bytes={} ratio={ratio:.3}", coded.len(), bytes.len());
            write_file(&output, &bytes)?;
        }
        Command::Decompress { input, output, binary } => {
            let bytes = fs::read(&input).map_err(|e| Error::io(&input, e))?;
            let frames = decode_sequence(&split_frames(&bytes)?)?;
            fs::create_dir_all(&output).map_err(|e| Error::io(&output, e))?;
            for (i, f) in frames.iter().enumerate() {
                write_file(&output.join(format!("frame_{i}.ply")), &write_ply(f, ply_format(binary)))?;
            }
            println!("frames={}", frames.len());
        }
        Command::Downsample {
            input,
            output,
            qp,
            gridstep,
            binary,
        } => {
            let soup = load_cloud(&input, qp)?;
            let small = grid_downsample(&soup, gridstep)?;
            println!("points_in={} points_out={}", soup.len(), small.len());
            write_file(&output, &write_ply(&small, ply_format(binary)))?;
        }
        Command::Bench {
            input,
            synthetic,
            ops,
            structures,
            reps,
            gridsteps,
            qp,
            seed,
            queries,
            output,
        } => {
            let defaults = BenchPlan::default();
            let plan = BenchPlan {
                inputs: input,
                synthetic,
                structures: structures.unwrap_or(defaults.structures),
                operations: ops.unwrap_or(defaults.operations),
                repetitions: reps,
                gridsteps,
                qp,
                seed,
                queries,
            };
            let rows: Vec<_> = run_plan(&plan)?.iter().map(|c| c.row()).collect();
            let csv = write_report(&rows)?;
            match output {
                Some(path) => write_file(&path, &csv)?,
                None => print!("{}", String::from_utf8_lossy(&csv)),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cga: {e}");
            ExitCode::FAILURE
        }
    }
}
