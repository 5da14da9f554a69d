// z, I1(z)/I0(z): 200-point log grid over [1e-6, 1e8], mpmath at 60 digits.
pub const BESSEL_RATIO_TABLE: [(f64, f64); 200] = [
    (1.0e-6, 4.999999999999375e-7),
    (1.1758495540521567343e-6, 5.879247770259767574e-7),
    (1.3826221737646558614e-6, 6.9131108688216273812e-7),
    (1.6257556664437941529e-6, 8.1287783322162851366e-7),
    (1.911644075385702227e-6, 9.5582203769241449602e-7),
    (2.2478058335487254536e-6, 1.1239029167736528935e-6),
    (2.6430814869741052734e-6, 1.3215407434858986211e-6),
    (3.107866187782012994e-6, 1.5539330938891303496e-6),
    (3.6543830709572563791e-6, 1.8271915354755780323e-6),
    (4.2970047043208409531e-6, 2.1485023521554616661e-6),
    (5.0526310653356804401e-6, 2.5263155326597784059e-6),
    (5.9411339849650334415e-6, 2.9705669924694101807e-6),
    (6.9858797467852474242e-6, 3.4929398733713156804e-6),
    (8.214343584919426791e-6, 4.1071717924250717422e-6),
    (9.6588322411587024535e-6, 4.8294161205230323627e-6),
    (0.00001135733358343105387, 5.6786667916239662224e-6),
    (0.000013354515629298987912, 6.6772578145006386089e-6),
    (0.000015702901247293772192, 7.8514506234048836719e-6),
    (0.000018464249428955437786, 9.232124714084282081e-6),
    (0.000021711179456945041157, 0.000010855589727832888452),
    (0.000025529080682395173064, 0.000012764540340157700978),
    (0.000030018358135755893376, 0.000015009179066187346857),
    (0.000035297073027306498207, 0.000017648536510904746848),
    (0.000041504047578504755796, 0.000020752023784783984782),
    (0.000048802515836544312669, 0.000024401257911007640908),
    (0.000057384416483023946803, 0.000028692208229701646285),
    (0.00006747544053110694018, 0.000033737720246352763862),
    (0.000079340966657974917357, 0.000039670483297771801737),
    (0.000093293040262846842831, 0.000046646520080674390282),
    (0.00010969857978923836322, 0.000054849289812113656724),
    (0.00012898902612533086307, 0.00006449451292853160704),
    (0.0001516716888470922898, 0.000075835844205477319897),
    (0.00017834308769319094312, 0.00008917154349206884416),
    (0.00020970464013232325234, 0.00010485231948978795394),
    (0.00024658110758226030643, 0.00012329055285408739222),
    (0.00028994228538828766493, 0.00014497114117074125998),
    (0.00034092850697468121036, 0.00017046425101066025397),
    (0.00040088063288984650803, 0.00020044031241844616891),
    (0.00047137531341167237224, 0.00023568765015976831629),
    (0.00055426645206631057424, 0.00027713321539084850562),
    (0.00065173396048824239519, 0.00032586696294233098249),
    (0.00076634108680074575761, 0.00038317051527189015889),
    (0.00090110182516650203437, 0.00045055086685321255944),
    (0.0010595601792776159213, 0.00052978001529294266094),
    (0.0012458833642950079219, 0.00062294156127930082662),
    (0.0014649713983072857969, 0.0007324855026514962109),
    (0.0017225859653987864832, 0.00086129266323495851785),
    (0.0020255019392306669768, 0.0010127504502443167874),
    (0.0023816855519761584342, 0.0011908419316179267395),
    (0.0028005038941836306539, 0.0014002505743527519246),
    (0.0032929712550971504359, 0.0016464833958113805214),
    (0.0038720387818125551933, 0.001936015762649396255),
    (0.0045529350748669492334, 0.0022764616387799300839),
    (0.0053535666774107250903, 0.0026767737489486148778),
    (0.0062949889902218875267, 0.003147478904538066196),
    (0.0074019599969156428772, 0.0037009546520596730519),
    (0.0087035913614851621133, 0.0043517544738361393978),
    (0.01023411402105453155, 0.0051169900184892400004),
    (0.012033778407775895498, 0.0060167802919299433567),
    (0.014149912974345759436, 0.0070747794245750885843),
    (0.016638168860761287925, 0.0083187965735342242349),
    (0.019563983435170641059, 0.0097815237409471282884),
    (0.023004301197729179688, 0.011501389801761602466),
    (0.027049597304631350973, 0.013523561823849948137),
    (0.031806256927941194835, 0.015901117776889473966),
    (0.037399373024787974575, 0.018696417837310679201),
    (0.043976036093027200008, 0.021982704453310067601),
    (0.051709202428967582068, 0.025845963675079547519),
    (0.060802242616494231184, 0.030387081172480274278),
    (0.071494289865975781192, 0.035724324479148916693),
    (0.084066528856183250766, 0.041996176024156963084),
    (0.098849590466255841161, 0.049364525678023887226),
    (0.1162322468679852547, 0.058018200773821991661),
    (0.13667163564620065303, 0.068176756209608012852),
    (0.16070528182616388584, 0.080094352234942415518),
    (0.18896523396912097337, 0.094063389967698951853),
    (0.2221946860939523558, 0.11041732098924126995),
    (0.26126752255633282886, 0.12953165100561593139),
    (0.30721129988617575743, 0.15182156027645543071),
    (0.36123426997094315327, 0.17773370669589304596),
    (0.42475715525368989956, 0.20772863786609695995),
    (0.49945051158551397132, 0.2422489141727505869),
    (0.58727866131894814364, 0.28166692744145342518),
    (0.69055135201623276351, 0.32620646165751187165),
    (0.81198449931840119909, 0.37583517684695892688),
    (0.95477161142080581369, 0.43013427228567644134),
    (1.1226677735108135916, 0.4881693205475517407),
    (1.3200884008314178605, 0.54841157538092018041),
    (1.5522253574270474204, 0.60878068407040662236),
    (1.8251834943190433023, 0.66687238248409275636),
    (2.1461411978584042112, 0.7203710192247719918),
    (2.523539170434766063, 0.76753329165357228632),
    (2.9673024081888692231, 0.80753861445948947422),
    (3.4891012134067726269, 0.84053253075886482524),
    (4.1026581058271925387, 0.86735670117639646948),
    (4.8241087041653703963, 0.88913768458797487806),
    (5.6724260684919784784, 0.9069486372483549047),
    (6.6699196630301215654, 0.92165046935946778697),
    (7.8428220613376799586, 0.93388259611208323578),
    (9.2219788233343276088, 0.94411670243264521948),
    (10.84365968689610221, 0.95271124430911206204),
    (12.750512407130131305, 0.95994779256607982604),
    (14.992684327860456402, 0.96605269326133632925),
    (17.629141180959476887, 0.97121054634522063401),
    (20.729217795953712621, 0.9755733433094446062),
    (24.374441501222204294, 0.97926707373888761822),
    (28.660676169482510642, 0.98239669904095061922),
    (33.70064329271928582, 0.98504999951851679205),
    (39.626886387014779175, 0.98730060854796607163),
    (46.595256686646808467, 0.98921044097137394801),
    (54.789011795939423912, 0.99083165877674664391),
    (64.423635087213726546, 0.9922082764563987304),
    (75.752502587719137876, 0.99337748142492022868),
    (89.073546386104397296, 0.99437072629462121589),
    (104.73708979594495265, 0.99521463663154358147),
    (123.15506032928256814, 0.99593176823481187997),
    (144.81182276745336664, 0.99654124086252666804),
    (170.27691722258999863, 0.9970592699365928436),
    (200.22003718155845654, 0.99749961361054766218),
    (235.42864143224175141, 0.99787394934731235059),
    (276.82866303920657371, 0.99819219159697189995),
    (325.50885998350581322, 0.99846276012399659774),
    (382.74944785163123693, 0.99869280688980002742),
    (450.05576757004980936, 0.99888840806253362393),
    (529.19787359584417116, 0.99905472663596560529),
    (622.25708367302297777, 0.99919615024341640912),
    (731.68071434271964759, 0.99931640801277220142),
    (860.34644166845037735, 0.9994186696948263128),
    (1011.6379797662072528, 0.99950562978622726272),
    (1189.5340673703195557, 0.99957957894159126497),
    (1398.7131026472384147, 0.99964246461202068487),
    (1644.6761779946638168, 0.9996959425473843885),
    (1933.8917504552310018, 0.99974142054753820815),
    (2273.9657523579281485, 0.99978009563525006038),
    (2673.8416158399468892, 0.99981298564441957884),
    (3144.0354715914997316, 0.99984095606586149459),
    (3696.9127071950272522, 0.99986474286499290917),
    (4347.0131581250242792, 0.99988497187751565851),
    (5111.433483440167285, 0.99990217529751974942),
    (6010.2767820703827655, 0.99991680569476201559),
    (7067.1812739274911804, 0.9999292479320235911),
    (8309.9419493533934284, 0.99993982929759546579),
    (9771.2415353464976851, 0.99994882812054709705),
    (11489.510001873090587, 0.99995648109620386578),
    (13509.935211980268051, 0.99996298951510207521),
    (15885.651294280527745, 0.99996852455968162631),
    (18679.135990207824993, 0.99997323180833531305),
    (21963.853724165462117, 0.99997723506549864462),
    (25826.187606826760534, 0.99998063961867512615),
    (30367.711180354583333, 0.99998353500817430445),
    (35707.859649004631016, 0.99998599738249106048),
    (41987.07084443909727, 0.99998809150133310455),
    (49370.478528390024401, 0.99998987243901958157),
    (58052.255160948989459, 0.99999138703308108702),
    (68260.718342723883517, 0.99999267511618130558),
    (80264.335222571753725, 0.99999377056377546625),
    (94378.782777753812953, 0.99999470218507011606),
    (110975.24964120719117, 0.99999549448072426979),
    (130490.19780144024237, 0.99999616828722495675),
    (153436.84089300123212, 0.99999674132488805974),
    (180418.64093920722504, 0.99999722866389950591),
    (212145.17849106300379, 0.99999764312065549497),
    (249450.81352303162568, 0.99999799559482672669),
    (293316.62783900444558, 0.99999829535601221855),
    (344896.22604057579855, 0.9999985502875222239),
    (405546.07358408289943, 0.99999876709370205879),
    (476861.16977144701758, 0.99999895147624963678),
    (560716.99382054577887, 0.99999910828416395512),
    (659318.82713335467735, 0.99999924164126821034),
    (775259.74886294611275, 0.99999935505466139597),
    (911588.8299750822105, 0.99999945150695063141),
    (1071891.3192051277447, 0.99999953353468989077),
    (1260382.9296797274438, 0.9999996032950880227),
    (1482020.7057988583351, 0.99999966262274043274),
    (1742633.3860096501472, 0.99999971307787642272),
    (2049074.6898158470317, 0.99999975598739104619),
    (2409403.5602395251184, 0.99999979247974057514),
    (2833096.1018393243648, 0.99999982351461928992),
    (3331294.7879346731745, 0.99999984990819805744),
    (3917101.4908092594904, 0.99999987235458844135),
    (4605922.0411451060923, 0.99999989144409682308),
    (5415871.3780794724998, 0.99999990767874859362),
    (6368249.9447185872796, 0.99999992148549068127),
    (7488103.8575900226283, 0.99999993322741962422),
    (8804883.5816434626653, 0.99999994321333047048),
    (10353218.432956622135, 0.99999995170583762804),
    (12173827.277396613101, 0.99999995892828123196),
    (14314589.37523478887, 0.99999996507060065604),
    (16831803.533309567373, 0.99999997029432963396),
    (19791668.678535570843, 0.99999997473684435421),
    (23272024.789604089152, 0.99999997851497624759),
    (27364399.970746704879, 0.99999998172808447828),
    (32176417.502507363716, 0.99999998446066894035),
    (37834626.171319294364, 0.99999998678459247781),
    (44487828.311275850412, 0.9999999887609707691),
    (52310993.080562621717, 0.99999999044177957739),
    (61509857.88580501538, 0.99999999187122163474),
    (72326338.964835363577, 0.99999999308688910728),
    (85044893.418026789586, 0.99999999412075221246),
    (100000000.0, 0.9999999949999999875),
];
